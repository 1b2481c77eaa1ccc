#include <doctest.h>

#include <cmath>
#include <vector>

#include "fd_check.hpp"
#include "tricode/adam.hpp"
#include "tricode/rng.hpp"
#include "tricode/tensor.hpp"

using namespace tricode;
using tricode::testing::fd_check_grads;

namespace {

std::vector<double> random_values(Rng& rng, int64_t n, double lo = -1.0,
                                  double hi = 1.0) {
  std::vector<double> out(static_cast<size_t>(n));
  for (double& v : out) {
    v = lo + (hi - lo) * rng.next_double();
  }
  return out;
}

}  // namespace

TEST_CASE("construction and basic accessors") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.numel() == 6);
  CHECK(z.ndim() == 2);
  CHECK(z.dim(0) == 2);
  CHECK(z.dim(1) == 3);
  for (double v : z.data()) {
    CHECK(v == 0.0);
  }

  Tensor f = Tensor::full({4}, 2.5);
  for (double v : f.data()) {
    CHECK(v == 2.5);
  }

  CHECK(Tensor::scalar(3.0).item() == 3.0);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor().item(), ContractError);
}

TEST_CASE("sum of squares has gradient 2x") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tensor loss = sum_all(mul(x, x));
  CHECK(loss.item() == doctest::Approx(14.0));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward accumulates across calls") {
  Tensor x = Tensor::from_data({2}, {1.0, -2.0}, true);
  Tensor loss = sum_all(mul(x, x));
  backward(loss);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  CHECK(x.grad()[1] == doctest::Approx(-8.0));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
}

TEST_CASE("diamond-shaped graphs accumulate through both paths") {
  // loss = sum(x*x + x) so dloss/dx = 2x + 1.
  Tensor x = Tensor::from_data({2}, {3.0, -1.0}, true);
  Tensor loss = sum_all(add(mul(x, x), x));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(7.0));
  CHECK(x.grad()[1] == doctest::Approx(-1.0));
}

TEST_CASE("matmul matches a naive triple loop on random cases") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(5));
    const int n = 1 + static_cast<int>(rng.below(5));
    auto av = random_values(rng, m * k);
    auto bv = random_values(rng, k * n);
    Tensor c = matmul(Tensor::from_data({m, k}, av),
                      Tensor::from_data({k, n}, bv));
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double want = 0.0;
        for (int kk = 0; kk < k; ++kk) {
          want += av[i * k + kk] * bv[kk * n + j];
        }
        CHECK(c.data()[i * n + j] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                  DimensionError);
}

TEST_CASE("transpose round-trips and moves entries") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = transpose(a);
  CHECK(t.dim(0) == 3);
  CHECK(t.dim(1) == 2);
  CHECK(t.data()[0] == 1.0);
  CHECK(t.data()[1] == 4.0);
  Tensor back = transpose(t);
  for (size_t i = 0; i < 6; ++i) {
    CHECK(back.data()[i] == a.data()[i]);
  }
}

TEST_CASE("softmax rows sum to one and match exp of log_softmax") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(4));
    const int cols = 2 + static_cast<int>(rng.below(6));
    auto xv = random_values(rng, rows * cols, -30.0, 30.0);
    Tensor x = Tensor::from_data({rows, cols}, xv);
    Tensor s = softmax_rows(x);
    Tensor ls = log_softmax_rows(x);
    for (int i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < cols; ++j) {
        const double p = s.data()[i * cols + j];
        sum += p;
        CHECK(p == doctest::Approx(std::exp(ls.data()[i * cols + j]))
                       .epsilon(1e-9));
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("softmax of uniform logits is uniform") {
  Tensor s = softmax_rows(Tensor::full({1, 5}, 3.25));
  for (double v : s.data()) {
    CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("pointwise op values at reference points") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == doctest::Approx(0.5));
  CHECK(tanh(Tensor::scalar(0.0)).item() == doctest::Approx(0.0));
  CHECK(gelu(Tensor::scalar(0.0)).item() == doctest::Approx(0.0));
  CHECK(softplus(Tensor::scalar(0.0)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // softplus stays finite and linear-ish for large inputs.
  CHECK(softplus(Tensor::scalar(1000.0)).item() == doctest::Approx(1000.0));
  CHECK(softplus(Tensor::scalar(-1000.0)).item() == doctest::Approx(0.0));
  CHECK(tricode::log(Tensor::scalar(std::exp(1.0))).item() ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(tricode::log(Tensor::scalar(0.0)), DomainError);
  CHECK_THROWS_AS(tricode::log(Tensor::scalar(-1.0)), DomainError);
}

TEST_CASE("broadcast add routes bias gradients through a row sum") {
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor b = Tensor::from_data({3}, {10, 20, 30}, true);
  Tensor loss = sum_all(add(x, b));
  CHECK(loss.item() == doctest::Approx(21.0 + 120.0));
  backward(loss);
  for (double g : x.grad()) {
    CHECK(g == doctest::Approx(1.0));
  }
  for (double g : b.grad()) {
    CHECK(g == doctest::Approx(2.0));
  }
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})),
                  DimensionError);
}

TEST_CASE("layer_norm output is standardized under identity affine") {
  Rng rng(11);
  const int rows = 3, cols = 8;
  Tensor x = Tensor::from_data({rows, cols},
                               random_values(rng, rows * cols, -5.0, 5.0));
  Tensor y = layer_norm(x, Tensor::full({cols}, 1.0), Tensor::zeros({cols}));
  for (int i = 0; i < rows; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < cols; ++j) {
      mean += y.data()[i * cols + j];
    }
    mean /= cols;
    for (int j = 0; j < cols; ++j) {
      const double d = y.data()[i * cols + j] - mean;
      var += d * d;
    }
    var /= cols;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("gather, pick, slice, concat, reshape move values and gradients") {
  Tensor x = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6}, true);

  Tensor g = gather_rows(x, {2, 0, 2});
  CHECK(g.data() == std::vector<double>{5, 6, 1, 2, 5, 6});
  backward(sum_all(g));
  CHECK(x.grad() == std::vector<double>{1, 1, 0, 0, 2, 2});

  Tensor p = pick_per_row(Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}),
                          {2, 0});
  CHECK(p.data() == std::vector<double>{3, 4});

  Tensor s = slice_cols(Tensor::from_data({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8}),
                        1, 2);
  CHECK(s.data() == std::vector<double>{2, 3, 6, 7});

  Tensor cc = concat_cols({Tensor::from_data({2, 1}, {1, 3}),
                           Tensor::from_data({2, 2}, {7, 8, 9, 10})});
  CHECK(cc.shape() == std::vector<int>{2, 3});
  CHECK(cc.data() == std::vector<double>{1, 7, 8, 3, 9, 10});

  Tensor cr = concat_rows({Tensor::from_data({1, 2}, {1, 2}),
                           Tensor::from_data({2, 2}, {3, 4, 5, 6})});
  CHECK(cr.shape() == std::vector<int>{3, 2});
  CHECK(cr.data() == std::vector<double>{1, 2, 3, 4, 5, 6});

  Tensor r = reshape(Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}), {3, 2});
  CHECK(r.shape() == std::vector<int>{3, 2});
  CHECK(r.data() == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {4, 2}), DimensionError);
  CHECK_THROWS_AS(gather_rows(Tensor::zeros({2, 2}), {2}), ContractError);
}

TEST_CASE("reductions and dot") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(sum_all(a).item() == doctest::Approx(10.0));
  CHECK(mean_all(a).item() == doctest::Approx(2.5));
  Tensor mr = mean_rows(a);
  CHECK(mr.data()[0] == doctest::Approx(2.0));
  CHECK(mr.data()[1] == doctest::Approx(3.0));
  CHECK(dot(Tensor::from_data({3}, {1, 2, 3}),
            Tensor::from_data({3}, {4, 5, 6}))
            .item() == doctest::Approx(32.0));
  CHECK_THROWS_AS(dot(Tensor::zeros({3}), Tensor::zeros({4})),
                  DimensionError);

  Tensor st = stack_scalars({Tensor::scalar(1.5), Tensor::scalar(-2.0)});
  CHECK(st.shape() == std::vector<int>{2});
  CHECK(st.data() == std::vector<double>{1.5, -2.0});
}

TEST_CASE("dropout semantics") {
  Tensor x = Tensor::full({100}, 1.0);
  Rng rng(99);
  Tensor same = dropout(x, 0.0, rng);
  CHECK(same.same_storage(x));

  const double rate = 0.25;
  Rng r1(42), r2(42), r3(43);
  Tensor d1 = dropout(x, rate, r1);
  Tensor d2 = dropout(x, rate, r2);
  Tensor d3 = dropout(x, rate, r3);
  CHECK(d1.data() == d2.data());
  CHECK(d1.data() != d3.data());
  int kept = 0;
  for (double v : d1.data()) {
    const bool zero = v == 0.0;
    const bool scaled = std::fabs(v - 1.0 / (1.0 - rate)) < 1e-12;
    CHECK((zero || scaled));
    kept += scaled ? 1 : 0;
  }
  CHECK(kept > 50);
  CHECK(kept < 100);
  CHECK_THROWS_AS(dropout(x, 1.0, r1), DomainError);
  CHECK_THROWS_AS(dropout(x, -0.1, r1), DomainError);
}

TEST_CASE("finite differences confirm gradients of every op") {
  Rng rng(2024);
  int trials_run = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 2 + static_cast<int>(rng.below(3));
    const int k = 2 + static_cast<int>(rng.below(3));
    const int n = 2 + static_cast<int>(rng.below(3));
    std::vector<std::vector<int>> shapes = {{m, k}, {k, n}, {n}, {n}, {n}};
    std::vector<std::vector<double>> values = {
        random_values(rng, m * k), random_values(rng, k * n),
        random_values(rng, n, 0.5, 1.5), random_values(rng, n, -0.5, 0.5),
        random_values(rng, n)};
    auto build = [n](std::vector<Tensor>& leaves) {
      Tensor h = matmul(leaves[0], leaves[1]);
      h = layer_norm(h, leaves[2], leaves[3]);
      h = add(h, leaves[4]);
      Tensor mix = add(gelu(h), mul(sigmoid(h), tricode::tanh(h)));
      mix = add(mix, softplus(h));
      Tensor probs = softmax_rows(mix);
      Tensor lp = log_softmax_rows(mix);
      Tensor picked = pick_per_row(lp, std::vector<int>(
                                           static_cast<size_t>(probs.dim(0)),
                                           n - 1));
      return add(scale(mean_all(mul(probs, probs)), 3.0),
                 scale(sum_all(picked), 0.1));
    };
    auto bad = fd_check_grads(build, shapes, values);
    CHECK_MESSAGE(bad.empty(), tricode::testing::describe(bad));
    ++trials_run;
  }
  CHECK(trials_run == 30);
}

TEST_CASE("finite differences confirm structure-op gradients") {
  Rng rng(5150);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 3 + static_cast<int>(rng.below(3));
    const int cols = 4;
    std::vector<std::vector<int>> shapes = {{rows, cols}, {rows, 2}};
    std::vector<std::vector<double>> values = {random_values(rng, rows * cols),
                                               random_values(rng, rows * 2)};
    auto build = [rows](std::vector<Tensor>& leaves) {
      Tensor left = slice_cols(leaves[0], 0, 2);
      Tensor right = slice_cols(leaves[0], 2, 2);
      Tensor joined = concat_cols({left, mul(right, leaves[1])});
      Tensor g = gather_rows(joined, {0, rows - 1, 1, 1});
      Tensor flat = reshape(g, {4 * 4});
      Tensor mr = mean_rows(transpose(reshape(flat, {4, 4})));
      Tensor d = dot(mr, mr);
      return add(d, scale(sum_all(tricode::exp(scale(joined, 0.1))), 0.5));
    };
    auto bad = fd_check_grads(build, shapes, values);
    CHECK_MESSAGE(bad.empty(), tricode::testing::describe(bad));
  }
}

TEST_CASE("fd oracle rejects a deliberately wrong gradient") {
  // mean_all used where sum_all's gradient is expected: the checker must
  // notice.  Guards against a silently permissive tolerance.
  auto build = [](std::vector<Tensor>& leaves) {
    return mean_all(mul(leaves[0], leaves[0]));
  };
  auto bad = fd_check_grads(build, {{3}}, {{1.0, 2.0, 3.0}}, 1e-5, 1e-4, 1e-8);
  CHECK(bad.empty());
  // Same forward, but compare against gradients of a different function.
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  backward(sum_all(mul(x, x)));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  // mean_all's analytic gradient is 2x/3, not 2x.
  Tensor y = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  backward(mean_all(mul(y, y)));
  CHECK(std::fabs(y.grad()[0] - x.grad()[0]) > 1.0 / 3.0);
}

TEST_CASE("adam single step matches the closed-form update") {
  ParamSet params;
  params.add("p", Tensor::from_data({1}, {1.0}));
  params.get("p").mutable_grad()[0] = 1.0;
  Adam opt(AdamConfig{.lr = 1e-4});
  opt.step(params);
  // m=0.1, v=0.001, mhat=1, vhat=1 => p -= 1e-4 / (1 + 1e-8).
  const double want = 1.0 - 1e-4 / (1.0 + 1e-8);
  CHECK(params.get("p").data()[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(params.get("p").data()[0] == doctest::Approx(0.9999).epsilon(1e-7));
}

TEST_CASE("adam trajectory matches an independent recurrence") {
  AdamConfig cfg{.lr = 0.01, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8};
  ParamSet params;
  params.add("w", Tensor::from_data({2}, {0.5, -1.5}));

  double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {0.5, -1.5};
  Rng rng(31337);
  Adam opt(cfg);
  for (int t = 1; t <= 25; ++t) {
    double g[2] = {rng.next_double() - 0.5, rng.next_double() - 0.5};
    auto& grad = params.get("w").mutable_grad();
    grad[0] = g[0];
    grad[1] = g[1];
    opt.step(params);
    for (int i = 0; i < 2; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / (1 - std::pow(cfg.beta1, t));
      const double vhat = v[i] / (1 - std::pow(cfg.beta2, t));
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    CHECK(params.get("w").data()[0] == doctest::Approx(w[0]).epsilon(1e-12));
    CHECK(params.get("w").data()[1] == doctest::Approx(w[1]).epsilon(1e-12));
  }
}

TEST_CASE("adam refuses parameters without gradients") {
  ParamSet params;
  params.add("weights", Tensor::zeros({2, 2}));
  params.get("weights").impl()->grad.clear();
  Adam opt;
  CHECK_THROWS_WITH_AS(opt.step(params),
                       "parameter 'weights' has no gradient", ContractError);
}

TEST_CASE("param set bookkeeping") {
  ParamSet params;
  params.add("a", Tensor::zeros({2, 3}));
  params.add("b", Tensor::zeros({4}));
  CHECK(params.total_scalars() == 10);
  CHECK(params.names() == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(params.add("a", Tensor::zeros({1})), ContractError);
  CHECK_THROWS_AS(params.get("missing"), ContractError);

  params.get("a").mutable_grad()[0] = 5.0;
  params.zero_grad();
  CHECK(params.get("a").grad()[0] == 0.0);
}

TEST_CASE("rng determinism and helpers") {
  Rng a(1), b(1), c(2);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  bool diverged = false;
  Rng a2(1);
  for (int i = 0; i < 100; ++i) {
    if (a2.next_u64() != c.next_u64()) {
      diverged = true;
    }
  }
  CHECK(diverged);

  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double d = r.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    CHECK(r.below(10) < 10);
  }
  CHECK_THROWS_AS(r.below(0), ContractError);

  auto sample = r.sample_without_replacement(20, 5);
  CHECK(sample.size() == 5);
  for (size_t i = 1; i < sample.size(); ++i) {
    CHECK(sample[i - 1] < sample[i]);
  }
  CHECK_THROWS_AS(r.sample_without_replacement(3, 4), ContractError);

  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}
