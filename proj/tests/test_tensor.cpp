#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "didnet/tensor.hpp"

using namespace didnet;

TEST_CASE("tensor_new basics") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.size() == 6);
  for (int64_t i = 0; i < 6; ++i) CHECK(z[i] == 0.0);

  Tensor c = Tensor::full({1}, 2.5);
  CHECK(c.size() == 1);
  CHECK(c[0] == 2.5);

  Tensor u1 = Tensor::uniform({4}, 0, 1, uint64_t(7));
  Tensor u2 = Tensor::uniform({4}, 0, 1, uint64_t(7));
  CHECK(std::memcmp(u1.data(), u2.data(), 4 * sizeof(Real)) == 0);
  for (int64_t i = 0; i < 4; ++i) {
    CHECK(u1[i] >= 0.0);
    CHECK(u1[i] < 1.0);
  }

  CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({2, -1}), ShapeError);
  CHECK_THROWS_AS(Tensor::from_vector({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("backward: linear, quadratic, l1") {
  {
    Tape tape;
    Tensor x = Tensor::from_vector({3}, {5, -1, 2}).set_requires_grad(true);
    Tensor loss = sum(x);
    backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);
  }
  {
    Tape tape;
    Tensor x = Tensor::from_vector({2}, {1, 2}).set_requires_grad(true);
    Tensor loss = sum(mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
  }
  {
    Tape tape;
    Tensor a = Tensor::from_vector({2}, {1, 3}).set_requires_grad(true);
    Tensor b = Tensor::from_vector({2}, {2, 2});
    Tensor loss = l1_loss(a, b);
    CHECK(loss.item() == doctest::Approx(1.0));
    backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(-0.5));
    CHECK(a.grad()[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("l1 subgradient at zero is zero") {
  Tape tape;
  Tensor a = Tensor::from_vector({2}, {1, 1}).set_requires_grad(true);
  Tensor b = Tensor::from_vector({2}, {1, 2});
  Tensor loss = l1_loss(a, b);
  backward(loss);
  CHECK(a.grad()[0] == 0.0);
  CHECK(a.grad()[1] == doctest::Approx(-0.5));
}

TEST_CASE("backward contract errors") {
  Tape tape;
  Tensor x = Tensor::from_vector({3}, {1, 2, 3}).set_requires_grad(true);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(backward(y), ContractError);
  Tensor s = sum(x);
  {
    NoTape off;
    CHECK_THROWS_AS(backward(s), ContractError);
  }
}

TEST_CASE("repeated backward accumulates until reset") {
  Tape tape;
  Tensor x = Tensor::from_vector({2}, {1, 2}).set_requires_grad(true);
  Tensor loss = sum(x);
  backward(loss);
  CHECK(x.grad()[0] == 1.0);
  backward(loss);  // documented: accumulates without reset
  CHECK(x.grad()[0] > 1.0);
  x.zero_grad();
  loss.zero_grad();
  tape.clear();
}

TEST_CASE("broadcasting follows trailing-dim alignment") {
  Tensor a = Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from_vector({3}, {10, 20, 30});
  Tensor s = add(a, row);
  CHECK(s.at({0, 0}) == 11.0);
  CHECK(s.at({1, 2}) == 36.0);

  Tensor col = Tensor::from_vector({2, 1}, {100, 200});
  Tensor t = add(a, col);
  CHECK(t.at({0, 2}) == 103.0);
  CHECK(t.at({1, 0}) == 204.0);

  CHECK_THROWS_AS(add(a, Tensor::zeros({2})), ShapeError);
  CHECK_THROWS_AS(mul(Tensor::zeros({4}), Tensor::zeros({3})), ShapeError);
}

TEST_CASE("broadcast gradients reduce over expanded dims") {
  Tape tape;
  Tensor a = Tensor::from_vector({2, 2}, {1, 2, 3, 4}).set_requires_grad(true);
  Tensor v = Tensor::from_vector({2}, {10, 20}).set_requires_grad(true);
  Tensor loss = sum(mul(a, v));
  backward(loss);
  CHECK(v.grad()[0] == doctest::Approx(1 + 3));
  CHECK(v.grad()[1] == doctest::Approx(2 + 4));
  CHECK(a.grad()[0] == doctest::Approx(10));
  CHECK(a.grad()[3] == doctest::Approx(20));
}

TEST_CASE("grad_check on sum of squares") {
  Tensor x = Tensor::uniform({4, 4}, -1, 1, uint64_t(1));
  const Real err =
      grad_check([](const Tensor& t) { return sum(mul(t, t)); }, x, 1e-5);
  CHECK(err <= 1e-6);
  CHECK_THROWS_AS(
      grad_check([](const Tensor& t) { return sum(t); }, x, 1e-2),
      ContractError);
}

TEST_CASE("replay determinism: same seed, same sequence, same grads") {
  auto run = [] {
    Tape tape;
    Tensor x = Tensor::uniform({8}, -1, 1, uint64_t(42)).set_requires_grad(true);
    Tensor y = mul(add_scalar(mul(x, x), 0.5), x);
    Tensor loss = sum(y);
    backward(loss);
    std::vector<Real> out(size_t(x.size()) * 2);
    std::memcpy(out.data(), y.data(), 8 * sizeof(Real));
    std::memcpy(out.data() + 8, x.grad(), 8 * sizeof(Real));
    return out;
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(Real)) == 0);
}

TEST_CASE("non-finite op output raises NumericError") {
  Tensor x = Tensor::full({2}, 1e308);
  CHECK_THROWS_AS(add(x, x), NumericError);
  CHECK_THROWS_AS(mul_scalar(x, 1e10), NumericError);
}

TEST_CASE("mean and reshape") {
  Tensor x = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
  CHECK(mean(x).item() == doctest::Approx(2.5));
  Tensor r = reshape(x, {4});
  CHECK(r.at({3}) == 4.0);
  CHECK_THROWS_AS(reshape(x, {3}), ShapeError);
}

TEST_CASE("DTEN round trip") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "didnet_dten").string();
  fs::create_directories(dir);

  Tensor t = Tensor::uniform({2, 3, 4}, -5, 5, uint64_t(9));
  const std::string f64 = dir + "/a.dten";
  dten_save(f64, t, DtenType::kF64);
  Tensor back = dten_load(f64);
  REQUIRE(back.shape() == t.shape());
  CHECK(std::memcmp(back.data(), t.data(), size_t(t.size()) * 8) == 0);

  const std::string f32 = dir + "/b.dten";
  dten_save(f32, t, DtenType::kF32);
  Tensor back32 = dten_load(f32);
  for (int64_t i = 0; i < t.size(); ++i)
    CHECK(back32[i] == doctest::Approx(t[i]).epsilon(1e-6));

  // header errors: truncation and bad magic
  {
    std::ofstream f(dir + "/trunc.dten", std::ios::binary | std::ios::trunc);
    f << "DTEN";
  }
  CHECK_THROWS_AS(dten_load(dir + "/trunc.dten"), IoError);
  {
    std::ofstream f(dir + "/bad.dten", std::ios::binary | std::ios::trunc);
    f << "NOPE1234567890";
  }
  CHECK_THROWS_AS(dten_load(dir + "/bad.dten"), IoError);
}
