#include "didnet/frame_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace didnet {

namespace {

const unsigned char kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32be(std::string& s, uint32_t v) {
  s.push_back(char((v >> 24) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char(v & 0xff));
}

uint32_t get_u32be(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::string& out, const char type[4],
                  const std::string& data) {
  put_u32be(out, uint32_t(data.size()));
  const size_t start = out.size();
  out.append(type, 4);
  out += data;
  uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(out.data() + start),
              uInt(out.size() - start));
  put_u32be(out, crc);
}

std::string zlib_compress(const std::string& raw) {
  uLongf bound = compressBound(uLong(raw.size()));
  std::string out(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()),
                6) != Z_OK)
    throw IoError("png: zlib compression failed");
  out.resize(bound);
  return out;
}

std::string zlib_decompress(const std::string& comp, size_t expected) {
  std::string out(expected, '\0');
  uLongf len = uLongf(expected);
  const int rc =
      uncompress(reinterpret_cast<Bytef*>(out.data()), &len,
                 reinterpret_cast<const Bytef*>(comp.data()), uLong(comp.size()));
  if (rc != Z_OK || len != expected)
    throw IoError("png: zlib decompression failed");
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png16(const std::string& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    throw ShapeError("write_png16: expected [3,H,W]");
  const int64_t H = rgb.dim(1), W = rgb.dim(2);
  const Real* r = rgb.data();
  const Real* g = r + H * W;
  const Real* b = g + H * W;

  std::string raw;
  raw.reserve(size_t(H) * (1 + size_t(W) * 6));
  for (int64_t y = 0; y < H; ++y) {
    raw.push_back('\0');  // filter type 0
    for (int64_t x = 0; x < W; ++x) {
      for (const Real* ch : {r, g, b}) {
        const Real v = std::clamp(ch[y * W + x], Real(0), Real(1));
        const uint16_t code = uint16_t(std::lround(v * 65535.0));
        raw.push_back(char(code >> 8));
        raw.push_back(char(code & 0xff));
      }
    }
  }

  std::string ihdr;
  put_u32be(ihdr, uint32_t(W));
  put_u32be(ihdr, uint32_t(H));
  ihdr.push_back(16);   // bit depth
  ihdr.push_back(2);    // color type: truecolor
  ihdr.push_back(0);    // compression
  ihdr.push_back(0);    // filter
  ihdr.push_back(0);    // interlace

  std::string out(reinterpret_cast<const char*>(kPngSig), 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", zlib_compress(raw));
  append_chunk(out, "IEND", "");

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write_png16: cannot open " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("write_png16: write failed");
}

Tensor read_png16(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_png16: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kPngSig, 8) != 0)
    throw IoError("read_png16: not a PNG file");

  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());
  size_t off = 8;
  int64_t W = 0, H = 0;
  bool have_ihdr = false;
  std::string idat;
  while (off + 12 <= buf.size()) {
    const uint32_t len = get_u32be(p + off);
    if (off + 12 + len > buf.size())
      throw IoError("read_png16: truncated chunk");
    const char* type = buf.data() + off + 4;
    const unsigned char* data = p + off + 8;
    const uint32_t stored_crc = get_u32be(p + off + 8 + len);
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, p + off + 4, uInt(len + 4));
    if (crc != stored_crc) throw IoError("read_png16: chunk CRC mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IoError("read_png16: bad IHDR");
      W = get_u32be(data);
      H = get_u32be(data + 4);
      const int depth = data[8], color = data[9], interlace = data[12];
      if (depth != 16 || color != 2)
        throw IoError("read_png16: unsupported bit depth or color type");
      if (interlace != 0) throw IoError("read_png16: interlace unsupported");
      if (W < 1 || H < 1 || W > (1 << 20) || H > (1 << 20))
        throw IoError("read_png16: bad dimensions");
      have_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.append(reinterpret_cast<const char*>(data), len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    off += 12 + len;
  }
  if (!have_ihdr || idat.empty())
    throw IoError("read_png16: missing IHDR or IDAT");

  const size_t stride = size_t(W) * 6;
  std::string raw = zlib_decompress(idat, size_t(H) * (1 + stride));

  // undo per-row filters; bpp = 6 bytes
  std::vector<unsigned char> img(size_t(H) * stride);
  const int bpp = 6;
  for (int64_t y = 0; y < H; ++y) {
    const unsigned char ft = (unsigned char)raw[size_t(y) * (1 + stride)];
    const unsigned char* src =
        reinterpret_cast<const unsigned char*>(raw.data()) +
        size_t(y) * (1 + stride) + 1;
    unsigned char* dst = img.data() + size_t(y) * stride;
    const unsigned char* up = y > 0 ? dst - stride : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= size_t(bpp) ? dst[i - size_t(bpp)] : 0;
      const int bb = up ? up[i] : 0;
      const int c = (up && i >= size_t(bpp)) ? up[i - size_t(bpp)] : 0;
      int v = src[i];
      switch (ft) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += bb; break;
        case 3: v += (a + bb) / 2; break;
        case 4: v += paeth(a, bb, c); break;
        default: throw IoError("read_png16: unknown filter type");
      }
      dst[i] = (unsigned char)(v & 0xff);
    }
  }

  Tensor out = make_tensor({3, H, W});
  Real* r = out.data();
  Real* g = r + H * W;
  Real* b = g + H * W;
  for (int64_t y = 0; y < H; ++y) {
    const unsigned char* row = img.data() + size_t(y) * stride;
    for (int64_t x = 0; x < W; ++x) {
      const unsigned char* px = row + size_t(x) * 6;
      r[y * W + x] = Real((px[0] << 8) | px[1]) / 65535.0;
      g[y * W + x] = Real((px[2] << 8) | px[3]) / 65535.0;
      b[y * W + x] = Real((px[4] << 8) | px[5]) / 65535.0;
    }
  }
  return out;
}

void save_frame(const std::string& path, const Frame& f) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".dten") {
    dten_save(path, f.pixels, DtenType::kF64);
  } else if (path.size() > 4 && path.substr(path.size() - 4) == ".png") {
    write_png16(path, f.pixels);
  } else {
    throw IoError("save_frame: unsupported extension in " + path);
  }
}

Frame load_frame(const std::string& path, ColorSpace space, BitDepth depth) {
  Tensor pixels;
  if (path.size() > 5 && path.substr(path.size() - 5) == ".dten") {
    pixels = dten_load(path);
    if (pixels.rank() != 3 || pixels.dim(0) != 3)
      throw IoError("load_frame: DTEN tensor is not [3,H,W]");
  } else if (path.size() > 4 && path.substr(path.size() - 4) == ".png") {
    pixels = read_png16(path);
  } else {
    throw IoError("load_frame: unsupported extension in " + path);
  }
  return make_frame(std::move(pixels), space, depth);
}

}  // namespace didnet
