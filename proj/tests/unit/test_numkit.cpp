#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <map>
#include <thread>

#include "gradcheck.hpp"
#include "unimask/error.hpp"
#include "unimask/numkit/dct.hpp"
#include "unimask/numkit/ops.hpp"

using namespace unimask;
using nk::Shape;
using nk::Tensor;

namespace {

std::vector<double> uniform(std::size_t n, std::mt19937_64& rng,
                            double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Tensor random_param(Shape shape, std::mt19937_64& rng) {
  const auto n = nk::numel(shape);
  return Tensor::parameter(std::move(shape), uniform(n, rng));
}

// Weighted sum so every output element carries a distinct gradient.
Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return nk::sum(nk::mul(y, Tensor::constant(y.shape(), uniform(y.size(), rng))));
}

// Maclaurin series of erf, independent of std::erf.
double erf_series(double z) {
  double sum = 0.0, term = z;  // term = (-1)^n z^(2n+1) / n!
  for (int n = 0; n < 60; ++n) {
    sum += term / (2.0 * n + 1.0);
    term *= -z * z / (n + 1.0);
  }
  return 2.0 / std::sqrt(std::numbers::pi) * sum;
}

}  // namespace

TEST_CASE("matmul examples") {
  const Tensor eye = Tensor::constant({2, 2}, {1, 0, 0, 1});
  const Tensor m = Tensor::constant({2, 2}, {1, 2, 3, 4});
  const Tensor r = nk::matmul(eye, m);
  CHECK(r.shape() == Shape{2, 2});
  for (int i = 0; i < 4; ++i) CHECK(r[i] == m[i]);

  const Tensor p = Tensor::constant({2, 2}, {1, 0, 0, 0});
  const Tensor v = Tensor::constant({2, 1}, {5, 7});
  const Tensor pv = nk::matmul(p, v);
  CHECK(pv[0] == 5.0);
  CHECK(pv[1] == 0.0);
}

TEST_CASE("matmul matches a triple loop") {
  std::mt19937_64 rng(1);
  const auto av = uniform(12, rng), bv = uniform(8, rng);
  const Tensor c = nk::matmul(Tensor::constant({3, 4}, av),
                              Tensor::constant({4, 2}, bv));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      double ref = 0.0;
      for (int k = 0; k < 4; ++k) ref += av[i * 4 + k] * bv[k * 2 + j];
      CHECK(std::fabs(c[i * 2 + j] - ref) < 1e-12);
    }
  }
  // Broadcast batch: [2,1,3,4] x [3,4,2] -> [2,3,3,2].
  const auto xa = uniform(24, rng), xb = uniform(24, rng);
  const Tensor bc = nk::matmul(Tensor::constant({2, 1, 3, 4}, xa),
                               Tensor::constant({3, 4, 2}, xb));
  CHECK(bc.shape() == Shape{2, 3, 3, 2});
  for (int s = 0; s < 2; ++s) {
    for (int q = 0; q < 3; ++q) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
          double ref = 0.0;
          for (int k = 0; k < 4; ++k) {
            ref += xa[s * 12 + i * 4 + k] * xb[q * 8 + k * 2 + j];
          }
          CHECK(std::fabs(bc[((s * 3 + q) * 3 + i) * 2 + j] - ref) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    nk::matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
}

TEST_CASE("softmax examples") {
  const Tensor a = nk::softmax(Tensor::constant({2}, {0, 0}), 0);
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == doctest::Approx(0.5));
  const Tensor b = nk::softmax(Tensor::constant({2}, {1000, 1000}), 0);
  CHECK(b[0] == 0.5);
  CHECK(b[1] == 0.5);
  const Tensor c = nk::softmax(Tensor::constant({3}, {1, 2, 3}), -1);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::fabs(c[i] - std::exp(i + 1.0) / z) < 1e-15);
  }
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = uniform(4 * 7, rng, -30.0, 30.0);
    const double shift = uniform(1, rng, -100.0, 100.0)[0];
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += shift;
    const Tensor y = nk::softmax(Tensor::constant({4, 7}, v), 1);
    const Tensor ys = nk::softmax(Tensor::constant({4, 7}, shifted), 1);
    for (int r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int c = 0; c < 7; ++c) {
        s += y[r * 7 + c];
        CHECK(y[r * 7 + c] >= 0.0);
        CHECK(std::fabs(y[r * 7 + c] - ys[r * 7 + c]) < 1e-12);
      }
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
  }
  // Softmax along a middle axis.
  const auto v = uniform(2 * 3 * 4, rng);
  const Tensor y = nk::softmax(Tensor::constant({2, 3, 4}, v), 1);
  for (int o = 0; o < 2; ++o) {
    for (int i = 0; i < 4; ++i) {
      double s = 0.0;
      for (int l = 0; l < 3; ++l) s += y[(o * 3 + l) * 4 + i];
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("masked softmax gives disallowed entries exactly zero") {
  const Tensor x = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor y = nk::masked_softmax(x, {1, 0, 1, 1, 1, 0});
  CHECK(y[1] == 0.0);
  CHECK(y[5] == 0.0);
  CHECK(std::fabs(y[0] + y[2] - 1.0) < 1e-15);
  CHECK(std::fabs(y[3] + y[4] - 1.0) < 1e-15);
  CHECK_THROWS_AS(nk::masked_softmax(x, {0, 0, 0}), ContractError);
}

TEST_CASE("layer_norm examples") {
  const Tensor one = Tensor::constant({3}, {1, 1, 1});
  const Tensor zero = Tensor::constant({3}, {0, 0, 0});
  const Tensor y = nk::layer_norm(Tensor::constant({1, 3}, {5, 5, 5}), one, zero);
  for (int i = 0; i < 3; ++i) CHECK(y[i] == 0.0);

  const Tensor y2 = nk::layer_norm(Tensor::constant({2}, {1, -1}),
                                   Tensor::constant({2}, {1, 1}),
                                   Tensor::constant({2}, {0, 0}));
  CHECK(y2[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(y2[1] == doctest::Approx(-1.0).epsilon(1e-4));

  std::mt19937_64 rng(3);
  const auto row = uniform(9, rng), g = uniform(9, rng), b = uniform(9, rng);
  const Tensor y3 = nk::layer_norm(Tensor::constant({9}, row),
                                   Tensor::constant({9}, g),
                                   Tensor::constant({9}, b));
  double mu = 0.0;
  for (double v : row) mu += v;
  mu /= 9.0;
  double var = 0.0;
  for (double v : row) var += (v - mu) * (v - mu);
  var /= 9.0;
  for (int i = 0; i < 9; ++i) {
    const double ref = g[i] * (row[i] - mu) / std::sqrt(var + 1e-5) + b[i];
    CHECK(std::fabs(y3[i] - ref) < 1e-12);
  }
}

TEST_CASE("gelu examples") {
  CHECK(nk::gelu(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(nk::gelu(Tensor::scalar(12.0)).item() == doctest::Approx(12.0));
  CHECK(std::fabs(nk::gelu(Tensor::scalar(-12.0)).item()) < 1e-20);
  const double ref = 0.5 * (1.0 + erf_series(1.0 / std::sqrt(2.0)));
  CHECK(std::fabs(nk::gelu(Tensor::scalar(1.0)).item() - ref) < 1e-14);
}

TEST_CASE("backward examples") {
  std::mt19937_64 rng(5);
  Tensor x = random_param({2, 3}, rng);
  nk::sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);

  Tensor y = random_param({4}, rng);
  nk::sum(nk::mul(y, y)).backward();
  const auto gy = y.grad();
  for (int i = 0; i < 4; ++i) CHECK(gy[i] == doctest::Approx(2.0 * y[i]));

  CHECK_THROWS_AS(nk::scale(x, 2.0).backward(), ContractError);
}

TEST_CASE("tape order puts inputs before consumers and visits each node once") {
  std::mt19937_64 rng(6);
  Tensor a = random_param({3}, rng);
  Tensor b = random_param({3}, rng);
  const Tensor shared = nk::mul(a, b);
  const Tensor loss = nk::sum(nk::add(nk::square(shared), shared));
  const auto order = nk::topological_order(loss);
  std::map<const nk::Node*, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) {
    CHECK(pos.count(order[i]) == 0);
    pos[order[i]] = i;
  }
  for (const nk::Node* n : order) {
    for (const auto& in : n->inputs) {
      if (in->requires_grad) CHECK(pos.at(in.get()) < pos.at(n));
    }
  }
  CHECK(order.back() == loss.node());
  loss.backward();
  const auto ga = a.grad();
  for (int i = 0; i < 3; ++i) {
    const double s = a[i] * b[i];
    CHECK(ga[i] == doctest::Approx((2.0 * s + 1.0) * b[i]));
  }
}

TEST_CASE("no-grad guard suppresses recording") {
  std::mt19937_64 rng(8);
  Tensor a = random_param({3}, rng);
  {
    nk::NoGradGuard guard;
    CHECK_FALSE(nk::scale(a, 2.0).requires_grad());
  }
  CHECK(nk::scale(a, 2.0).requires_grad());
}

TEST_CASE("every differentiable op matches central differences") {
  using testing::grad_check;
  std::mt19937_64 rng(11);
  auto expect_ok = [](const testing::GradCheckResult& r, const char* name) {
    INFO(name << " worst " << r.worst << " rel " << r.max_rel_error);
    CHECK(r.max_rel_error < 1e-4);
  };

  {
    Tensor a = random_param({3, 4}, rng), b = random_param({4}, rng);
    expect_ok(grad_check([&] { return probe(nk::add(a, b)); }, {a, b}), "add");
    expect_ok(grad_check([&] { return probe(nk::sub(b, a)); }, {a, b}), "sub");
    expect_ok(grad_check([&] { return probe(nk::mul(a, b)); }, {a, b}), "mul");
  }
  {
    Tensor a = random_param({2, 1, 3}, rng);
    Tensor b = Tensor::parameter({4, 1}, uniform(4, rng, 0.5, 2.0));
    expect_ok(grad_check([&] { return probe(nk::div(a, b)); }, {a, b}), "div");
    expect_ok(grad_check([&] { return probe(nk::mul(b, a)); }, {a, b}),
              "mul general broadcast");
  }
  {
    Tensor a = random_param({2, 3, 4}, rng), w = random_param({4, 5}, rng);
    expect_ok(grad_check([&] { return probe(nk::matmul(a, w)); }, {a, w}),
              "matmul weight");
    Tensor l = random_param({3, 3}, rng);
    expect_ok(grad_check([&] { return probe(nk::matmul(l, a)); }, {l, a}),
              "matmul left broadcast");
    Tensor b = random_param({2, 4, 2}, rng);
    expect_ok(grad_check([&] { return probe(nk::matmul(a, b)); }, {a, b}),
              "matmul batched");
  }
  {
    Tensor x = random_param({2, 3, 4}, rng);
    expect_ok(grad_check([&] { return probe(nk::permute(x, {2, 0, 1})); }, {x}),
              "permute");
    expect_ok(grad_check([&] { return probe(nk::reshape(x, {6, 4})); }, {x}),
              "reshape");
    expect_ok(grad_check([&] { return probe(nk::slice(x, 1, 1, 3)); }, {x}),
              "slice");
    expect_ok(grad_check([&] { return probe(nk::gather(x, 2, {3, 0, 3})); }, {x}),
              "gather");
    expect_ok(grad_check([&] { return probe(nk::sum(x, 1, true)); }, {x}),
              "sum axis");
    expect_ok(grad_check([&] { return probe(nk::softmax(x, 1)); }, {x}),
              "softmax");
    expect_ok(grad_check([&] { return probe(nk::masked_softmax(
                                   x, {1, 0, 1, 1, 1, 1, 0, 1, 0, 0, 1, 1})); },
                         {x}),
              "masked softmax");
    expect_ok(grad_check([&] { return probe(nk::gelu(x)); }, {x}), "gelu");
    expect_ok(grad_check([&] { return probe(nk::square(x)); }, {x}), "square");
    expect_ok(grad_check([&] { return probe(nk::exp(x)); }, {x}), "exp");
    expect_ok(grad_check([&] { return nk::mean(nk::abs(x)); }, {x}), "abs");
    Tensor y = random_param({2, 3, 4}, rng);
    expect_ok(grad_check([&] { return probe(nk::concat({x, y}, 1)); }, {x, y}),
              "concat");
    expect_ok(grad_check([&] { return probe(nk::stack({x, y}, 3)); }, {x, y}),
              "stack");
  }
  {
    Tensor x = Tensor::parameter({5}, uniform(5, rng, 0.2, 2.0));
    expect_ok(grad_check([&] { return probe(nk::sqrt(x)); }, {x}), "sqrt");
  }
  {
    Tensor x = random_param({3, 6}, rng);
    Tensor g = random_param({6}, rng), b = random_param({6}, rng);
    expect_ok(grad_check([&] { return probe(nk::layer_norm(x, g, b)); }, {x, g, b}),
              "layer_norm");
  }
  {
    Tensor x = random_param({2, 5, 3}, rng);
    expect_ok(grad_check([&] { return probe(nk::dct_apply(x)); }, {x}), "dct");
  }
}

TEST_CASE("dct examples") {
  const Tensor c = nk::dct_apply(Tensor::full({8, 1}, 3.0));
  CHECK(c[0] == doctest::Approx(3.0 * std::sqrt(8.0)));
  for (int k = 1; k < 8; ++k) CHECK(std::fabs(c[k]) < 1e-12);

  const Tensor m = nk::dct_matrix(4);
  const Tensor mmt = nk::matmul(m, nk::transpose(m, 0, 1));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(std::fabs(mmt[i * 4 + j] - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("dct round trip is the identity for every T up to 256") {
  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (std::size_t t = 1; t <= 256; ++t) {
    const auto v = uniform(t * 2, rng);
    const Tensor back = nk::idct_apply(nk::dct_apply(Tensor::constant({t, 2}, v)));
    for (std::size_t i = 0; i < v.size(); ++i) {
      worst = std::max(worst, std::fabs(back[i] - v[i]));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("forward ops are deterministic and thread-safe without grad") {
  std::mt19937_64 rng(17);
  const Tensor a = random_param({16, 32}, rng), b = random_param({32, 8}, rng);
  auto run = [&] {
    nk::NoGradGuard guard;
    return nk::softmax(nk::gelu(nk::matmul(a, b)), -1);
  };
  const Tensor ref = run();
  std::vector<std::vector<double>> outs(4);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&, i] {
      const Tensor r = run();
      outs[i].assign(r.values().begin(), r.values().end());
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& o : outs) {
    CHECK(std::equal(o.begin(), o.end(), ref.values().begin()));
  }
}
