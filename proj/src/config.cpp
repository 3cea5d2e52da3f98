#include "didnet/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace didnet {

namespace {

const std::set<std::string> kRequired = {
    "width", "height", "qp", "seed", "channels", "lr",
    "steps", "aux_weight", "main_weight", "train_manifest", "out_dir"};

const std::set<std::string> kOptional = {
    "test_manifest", "residual_blocks", "dmc_layers", "color_blocks",
    "offset_channels", "checkpoint_every", "wa_enabled", "prior_enabled",
    "lr_warm_steps", "lr_halve_every"};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

template <class T>
T parse_num(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  T v;
  if (!(ss >> v) || !(ss >> std::ws).eof())
    throw ContractError("config: bad value for " + key + ": " + value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ContractError("config: bad boolean for " + key + ": " + value);
}

}  // namespace

Config parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractError("config: expected key=value, got: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kRequired.count(key) && !kOptional.count(key))
      throw ContractError("config: unknown key: " + key);
    if (kv.count(key)) throw ContractError("config: duplicate key: " + key);
    kv[key] = value;
  }
  for (const std::string& key : kRequired)
    if (!kv.count(key)) throw ContractError("config: missing key: " + key);

  Config c;
  c.width = parse_num<int64_t>("width", kv["width"]);
  c.height = parse_num<int64_t>("height", kv["height"]);
  c.qp = parse_num<int>("qp", kv["qp"]);
  c.seed = parse_num<uint64_t>("seed", kv["seed"]);
  c.channels = parse_num<int64_t>("channels", kv["channels"]);
  c.lr = parse_num<Real>("lr", kv["lr"]);
  c.steps = parse_num<int64_t>("steps", kv["steps"]);
  c.aux_weight = parse_num<Real>("aux_weight", kv["aux_weight"]);
  c.main_weight = parse_num<Real>("main_weight", kv["main_weight"]);
  c.train_manifest = kv["train_manifest"];
  c.out_dir = kv["out_dir"];

  if (kv.count("test_manifest")) c.test_manifest = kv["test_manifest"];
  if (kv.count("residual_blocks"))
    c.residual_blocks = parse_num<int>("residual_blocks", kv["residual_blocks"]);
  if (kv.count("dmc_layers"))
    c.dmc_layers = parse_num<int>("dmc_layers", kv["dmc_layers"]);
  if (kv.count("color_blocks"))
    c.color_blocks = parse_num<int>("color_blocks", kv["color_blocks"]);
  if (kv.count("offset_channels"))
    c.offset_channels =
        parse_num<int64_t>("offset_channels", kv["offset_channels"]);
  if (kv.count("checkpoint_every"))
    c.checkpoint_every =
        parse_num<int64_t>("checkpoint_every", kv["checkpoint_every"]);
  if (kv.count("wa_enabled")) c.wa_enabled = parse_bool("wa_enabled", kv["wa_enabled"]);
  if (kv.count("prior_enabled"))
    c.prior_enabled = parse_bool("prior_enabled", kv["prior_enabled"]);
  if (kv.count("lr_warm_steps"))
    c.lr_warm_steps = parse_num<int64_t>("lr_warm_steps", kv["lr_warm_steps"]);
  if (kv.count("lr_halve_every"))
    c.lr_halve_every =
        parse_num<int64_t>("lr_halve_every", kv["lr_halve_every"]);

  if (c.width < 16 || c.height < 16 || c.width % 8 != 0 || c.height % 8 != 0)
    throw ContractError("config: width/height must be multiples of 8, >= 16");
  if (c.qp != 27 && c.qp != 32 && c.qp != 37 && c.qp != 42)
    throw ContractError("config: qp must be one of 27/32/37/42");
  if (c.steps < 1 || c.channels < 1)
    throw ContractError("config: steps and channels must be positive");
  return c;
}

Config parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

}  // namespace didnet
