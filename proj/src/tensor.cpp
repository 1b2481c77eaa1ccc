#include "tricode/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tricode/rng.hpp"

namespace tricode {

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

NodePtr make_node(std::vector<int> shape, std::vector<NodePtr> parents = {}) {
  auto node = std::make_shared<TensorNode>();
  const int64_t n = shape_numel(shape);
  node->shape = std::move(shape);
  node->data.assign(static_cast<size_t>(n), 0.0);
  node->parents = std::move(parents);
  return node;
}

void ensure_grad(TensorNode* n) {
  if (n->grad.empty()) {
    n->grad.assign(n->data.size(), 0.0);
  }
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) {
    throw ContractError(std::string(op) + ": undefined tensor");
  }
}

// b broadcasts over a's leading axes when b's shape is a suffix of a's.
// Returns the number of leading repeats, or throws.
int64_t broadcast_repeats(const std::vector<int>& a, const std::vector<int>& b,
                          const char* op) {
  if (a.size() < b.size()) {
    throw DimensionError(std::string(op) + ": lhs " + shape_str(a) +
                         " incompatible with rhs " + shape_str(b));
  }
  const size_t off = a.size() - b.size();
  for (size_t i = 0; i < b.size(); ++i) {
    if (a[off + i] != b[i]) {
      throw DimensionError(std::string(op) + ": lhs " + shape_str(a) +
                           " incompatible with rhs " + shape_str(b));
    }
  }
  int64_t repeats = 1;
  for (size_t i = 0; i < off; ++i) {
    repeats *= a[i];
  }
  return repeats;
}

// Shared skeleton for elementwise binary ops with suffix broadcast.
// fwd(x, y) -> out; dfa/dfb give the partials w.r.t. a and b.
template <class Fwd, class Da, class Db>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 Da dfa, Db dfb) {
  check_defined(a, name);
  check_defined(b, name);
  (void)broadcast_repeats(a.shape(), b.shape(), name);
  auto an = a.impl();
  auto bn = b.impl();
  auto out = make_node(an->shape, {an, bn});
  const size_t bs = bn->data.size();
  for (size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = fwd(an->data[i], bn->data[i % bs]);
  }
  out->backward_fn = [an = an.get(), bn = bn.get(), dfa, dfb](TensorNode& o) {
    ensure_grad(an);
    ensure_grad(bn);
    const size_t bs2 = bn->data.size();
    for (size_t i = 0; i < o.data.size(); ++i) {
      const double g = o.grad[i];
      const double x = an->data[i];
      const double y = bn->data[i % bs2];
      an->grad[i] += g * dfa(x, y);
      bn->grad[i % bs2] += g * dfb(x, y);
    }
  };
  return Tensor::wrap(out);
}

// Elementwise unary op: fwd gives the value, dfdx(x, y) the derivative given
// input x and output y.
template <class Fwd, class Dfdx>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Dfdx dfdx) {
  check_defined(a, name);
  auto an = a.impl();
  auto out = make_node(an->shape, {an});
  for (size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = fwd(an->data[i]);
  }
  out->backward_fn = [an = an.get(), dfdx](TensorNode& o) {
    ensure_grad(an);
    for (size_t i = 0; i < o.data.size(); ++i) {
      an->grad[i] += o.grad[i] * dfdx(an->data[i], o.data[i]);
    }
  };
  return Tensor::wrap(out);
}

// Splits a 2D-or-1D tensor into rows of width `cols`.
void rows_of(const std::vector<int>& shape, const char* op, int64_t* rows,
             int64_t* cols) {
  if (shape.size() == 1) {
    *rows = 1;
    *cols = shape[0];
  } else if (shape.size() == 2) {
    *rows = shape[0];
    *cols = shape[1];
  } else {
    throw DimensionError(std::string(op) + ": expected 1D or 2D, got " +
                         shape_str(shape));
  }
}

}  // namespace

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw DimensionError("shape " + shape_str(shape) +
                           " has a non-positive dimension");
    }
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) {
      s += "x";
    }
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  auto node = make_node(std::move(shape));
  std::fill(node->data.begin(), node->data.end(), value);
  node->requires_grad = requires_grad;
  if (requires_grad) {
    ensure_grad(node.get());
  }
  return wrap(node);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  const int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(data.size())) {
    throw DimensionError("from_data: shape " + shape_str(shape) + " wants " +
                         std::to_string(n) + " values, got " +
                         std::to_string(data.size()));
  }
  auto node = make_node(std::move(shape));
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) {
    ensure_grad(node.get());
  }
  return wrap(node);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

detail::TensorNode& Tensor::check() const {
  if (!node_) {
    throw ContractError("use of undefined tensor");
  }
  return *node_;
}

void Tensor::set_requires_grad(bool v) {
  check().requires_grad = v;
  if (v) {
    ensure_grad(node_.get());
  }
}

const std::vector<double>& Tensor::grad() const {
  ensure_grad(&check());
  return node_->grad;
}

std::vector<double>& Tensor::mutable_grad() {
  ensure_grad(&check());
  return node_->grad;
}

void Tensor::zero_grad() {
  auto& n = check();
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

double Tensor::item() const {
  auto& n = check();
  if (n.data.size() != 1) {
    throw ContractError("item: tensor has " + std::to_string(n.data.size()) +
                        " elements, expected 1");
  }
  return n.data[0];
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

// ---- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
  check_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_str(loss.shape()));
  }
  // Iterative post-order DFS; reversing it yields a reverse topological order
  // in which every node is visited exactly once.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  TensorNode* root = loss.impl().get();
  seen.insert(root);
  stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (seen.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  // Interior grads are scratch space for this pass; only leaves accumulate
  // across calls.  Without the reset a second backward would scale by the
  // stale interior grads instead of adding one more unit.
  for (TensorNode* n : order) {
    if (n->backward_fn) {
      ensure_grad(n);
      std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
  }
  ensure_grad(root);
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) {
      n->backward_fn(*n);
    }
  }
}

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      a, "scale", [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(
      a, "add_scalar", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

// ---- matmul / transpose -----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: lhs " + shape_str(a.shape()) +
                         " incompatible with rhs " + shape_str(b.shape()));
  }
  auto an = a.impl();
  auto bn = b.impl();
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = make_node({static_cast<int>(m), static_cast<int>(n)}, {an, bn});
  const double* pa = an->data.data();
  const double* pb = bn->data.data();
  double* po = out->data.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      if (av == 0.0) {
        continue;
      }
      const double* brow = pb + kk * n;
      double* orow = po + i * n;
      for (int64_t j = 0; j < n; ++j) {
        orow[j] += av * brow[j];
      }
    }
  }
  out->backward_fn = [an = an.get(), bn = bn.get(), m, k, n](TensorNode& o) {
    ensure_grad(an);
    ensure_grad(bn);
    const double* g = o.grad.data();
    const double* pa2 = an->data.data();
    const double* pb2 = bn->data.data();
    // dA = G . B^T
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t kk = 0; kk < k; ++kk) {
        double acc = 0.0;
        const double* grow = g + i * n;
        const double* brow = pb2 + kk * n;
        for (int64_t j = 0; j < n; ++j) {
          acc += grow[j] * brow[j];
        }
        an->grad[static_cast<size_t>(i * k + kk)] += acc;
      }
    }
    // dB = A^T . G
    for (int64_t kk = 0; kk < k; ++kk) {
      for (int64_t i = 0; i < m; ++i) {
        const double av = pa2[i * k + kk];
        if (av == 0.0) {
          continue;
        }
        const double* grow = g + i * n;
        double* brow = bn->grad.data() + kk * n;
        for (int64_t j = 0; j < n; ++j) {
          brow[j] += av * grow[j];
        }
      }
    }
  };
  return Tensor::wrap(out);
}

Tensor transpose(const Tensor& a) {
  check_defined(a, "transpose");
  if (a.ndim() != 2) {
    throw DimensionError("transpose: expected 2D, got " +
                         shape_str(a.shape()));
  }
  auto an = a.impl();
  const int64_t r = a.dim(0), c = a.dim(1);
  auto out = make_node({static_cast<int>(c), static_cast<int>(r)}, {an});
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      out->data[static_cast<size_t>(j * r + i)] =
          an->data[static_cast<size_t>(i * c + j)];
    }
  }
  out->backward_fn = [an = an.get(), r, c](TensorNode& o) {
    ensure_grad(an);
    for (int64_t i = 0; i < r; ++i) {
      for (int64_t j = 0; j < c; ++j) {
        an->grad[static_cast<size_t>(i * c + j)] +=
            o.grad[static_cast<size_t>(j * r + i)];
      }
    }
  };
  return Tensor::wrap(out);
}

// ---- softmax family ---------------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  check_defined(a, "softmax_rows");
  int64_t rows = 0, cols = 0;
  rows_of(a.shape(), "softmax_rows", &rows, &cols);
  auto an = a.impl();
  auto out = make_node(an->shape, {an});
  for (int64_t i = 0; i < rows; ++i) {
    const double* x = an->data.data() + i * cols;
    double* y = out->data.data() + i * cols;
    double mx = x[0];
    for (int64_t j = 1; j < cols; ++j) {
      mx = std::max(mx, x[j]);
    }
    double z = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (int64_t j = 0; j < cols; ++j) {
      y[j] /= z;
    }
  }
  out->backward_fn = [an = an.get(), rows, cols](TensorNode& o) {
    ensure_grad(an);
    for (int64_t i = 0; i < rows; ++i) {
      const double* y = o.data.data() + i * cols;
      const double* g = o.grad.data() + i * cols;
      double gy = 0.0;
      for (int64_t j = 0; j < cols; ++j) {
        gy += g[j] * y[j];
      }
      double* dx = an->grad.data() + i * cols;
      for (int64_t j = 0; j < cols; ++j) {
        dx[j] += y[j] * (g[j] - gy);
      }
    }
  };
  return Tensor::wrap(out);
}

Tensor log_softmax_rows(const Tensor& a) {
  check_defined(a, "log_softmax_rows");
  int64_t rows = 0, cols = 0;
  rows_of(a.shape(), "log_softmax_rows", &rows, &cols);
  auto an = a.impl();
  auto out = make_node(an->shape, {an});
  for (int64_t i = 0; i < rows; ++i) {
    const double* x = an->data.data() + i * cols;
    double* y = out->data.data() + i * cols;
    double mx = x[0];
    for (int64_t j = 1; j < cols; ++j) {
      mx = std::max(mx, x[j]);
    }
    double z = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      z += std::exp(x[j] - mx);
    }
    const double lse = mx + std::log(z);
    for (int64_t j = 0; j < cols; ++j) {
      y[j] = x[j] - lse;
    }
  }
  out->backward_fn = [an = an.get(), rows, cols](TensorNode& o) {
    ensure_grad(an);
    for (int64_t i = 0; i < rows; ++i) {
      const double* y = o.data.data() + i * cols;
      const double* g = o.grad.data() + i * cols;
      double gsum = 0.0;
      for (int64_t j = 0; j < cols; ++j) {
        gsum += g[j];
      }
      double* dx = an->grad.data() + i * cols;
      for (int64_t j = 0; j < cols; ++j) {
        dx[j] += g[j] - std::exp(y[j]) * gsum;
      }
    }
  };
  return Tensor::wrap(out);
}

// ---- pointwise nonlinearities ----------------------------------------------

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid",
      [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  check_defined(a, "log");
  for (double v : a.data()) {
    if (!(v > 0.0)) {
      throw DomainError("log: input " + std::to_string(v) +
                        " is not positive");
    }
  }
  return unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary_op(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, "softplus",
      [](double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      },
      [](double x, double) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      });
}

// ---- layer norm -------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  check_defined(x, "layer_norm");
  check_defined(gamma, "layer_norm");
  check_defined(beta, "layer_norm");
  int64_t rows = 0, cols = 0;
  rows_of(x.shape(), "layer_norm", &rows, &cols);
  if (gamma.numel() != cols || beta.numel() != cols) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) +
                         " incompatible with gain " + shape_str(gamma.shape()) +
                         " / bias " + shape_str(beta.shape()));
  }
  auto xn = x.impl();
  auto gn = gamma.impl();
  auto bn = beta.impl();
  auto out = make_node(xn->shape, {xn, gn, bn});
  // Cache the normalized values and inverse stddev per row for backward.
  auto xhat = std::make_shared<std::vector<double>>(xn->data.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  for (int64_t i = 0; i < rows; ++i) {
    const double* xi = xn->data.data() + i * cols;
    double mean = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      mean += xi[j];
    }
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      const double d = xi[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(i)] = is;
    for (int64_t j = 0; j < cols; ++j) {
      const double h = (xi[j] - mean) * is;
      (*xhat)[static_cast<size_t>(i * cols + j)] = h;
      out->data[static_cast<size_t>(i * cols + j)] =
          gn->data[static_cast<size_t>(j)] * h + bn->data[static_cast<size_t>(j)];
    }
  }
  out->backward_fn = [xn = xn.get(), gn = gn.get(), bn = bn.get(), rows, cols,
                      xhat, inv_std](TensorNode& o) {
    ensure_grad(xn);
    ensure_grad(gn);
    ensure_grad(bn);
    for (int64_t i = 0; i < rows; ++i) {
      const double* g = o.grad.data() + i * cols;
      const double* h = xhat->data() + i * cols;
      const double is = (*inv_std)[static_cast<size_t>(i)];
      double sum_dh = 0.0, sum_dh_h = 0.0;
      for (int64_t j = 0; j < cols; ++j) {
        const double dh = g[j] * gn->data[static_cast<size_t>(j)];
        sum_dh += dh;
        sum_dh_h += dh * h[j];
        gn->grad[static_cast<size_t>(j)] += g[j] * h[j];
        bn->grad[static_cast<size_t>(j)] += g[j];
      }
      const double inv_n = 1.0 / static_cast<double>(cols);
      double* dx = xn->grad.data() + i * cols;
      for (int64_t j = 0; j < cols; ++j) {
        const double dh = g[j] * gn->data[static_cast<size_t>(j)];
        dx[j] += is * (dh - inv_n * sum_dh - h[j] * inv_n * sum_dh_h);
      }
    }
  };
  return Tensor::wrap(out);
}

// ---- gather / structure ops -------------------------------------------------

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  check_defined(x, "gather_rows");
  if (x.ndim() != 2) {
    throw DimensionError("gather_rows: expected 2D, got " +
                         shape_str(x.shape()));
  }
  const int64_t r = x.dim(0), c = x.dim(1);
  for (int idx : rows) {
    if (idx < 0 || idx >= r) {
      throw ContractError("gather_rows: index " + std::to_string(idx) +
                          " out of range for " + shape_str(x.shape()));
    }
  }
  auto xn = x.impl();
  auto out = make_node({static_cast<int>(rows.size()), static_cast<int>(c)}, {xn});
  for (size_t i = 0; i < rows.size(); ++i) {
    const double* src = xn->data.data() + static_cast<int64_t>(rows[i]) * c;
    std::copy(src, src + c, out->data.data() + static_cast<int64_t>(i) * c);
  }
  out->backward_fn = [xn = xn.get(), rows, c](TensorNode& o) {
    ensure_grad(xn);
    for (size_t i = 0; i < rows.size(); ++i) {
      const double* g = o.grad.data() + static_cast<int64_t>(i) * c;
      double* dst = xn->grad.data() + static_cast<int64_t>(rows[i]) * c;
      for (int64_t j = 0; j < c; ++j) {
        dst[j] += g[j];
      }
    }
  };
  return Tensor::wrap(out);
}

Tensor pick_per_row(const Tensor& x, const std::vector<int>& cols) {
  check_defined(x, "pick_per_row");
  if (x.ndim() != 2 || static_cast<size_t>(x.dim(0)) != cols.size()) {
    throw DimensionError("pick_per_row: input " + shape_str(x.shape()) +
                         " incompatible with " + std::to_string(cols.size()) +
                         " column picks");
  }
  const int64_t c = x.dim(1);
  for (int idx : cols) {
    if (idx < 0 || idx >= c) {
      throw ContractError("pick_per_row: column " + std::to_string(idx) +
                          " out of range for " + shape_str(x.shape()));
    }
  }
  auto xn = x.impl();
  auto out = make_node({static_cast<int>(cols.size())}, {xn});
  for (size_t i = 0; i < cols.size(); ++i) {
    out->data[i] = xn->data[static_cast<size_t>(static_cast<int64_t>(i) * c + cols[i])];
  }
  out->backward_fn = [xn = xn.get(), cols, c](TensorNode& o) {
    ensure_grad(xn);
    for (size_t i = 0; i < cols.size(); ++i) {
      xn->grad[static_cast<size_t>(static_cast<int64_t>(i) * c + cols[i])] +=
          o.grad[i];
    }
  };
  return Tensor::wrap(out);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw ContractError("concat_rows: no inputs");
  }
  int cols = -1;
  int total_rows = 0;
  std::vector<NodePtr> parents;
  for (const Tensor& p : parts) {
    check_defined(p, "concat_rows");
    if (p.ndim() != 2) {
      throw DimensionError("concat_rows: expected 2D, got " +
                           shape_str(p.shape()));
    }
    if (cols < 0) {
      cols = p.dim(1);
    } else if (p.dim(1) != cols) {
      throw DimensionError("concat_rows: column mismatch " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total_rows += p.dim(0);
    parents.push_back(p.impl());
  }
  auto out = make_node({total_rows, cols}, parents);
  size_t off = 0;
  for (const auto& p : parents) {
    std::copy(p->data.begin(), p->data.end(), out->data.begin() + static_cast<int64_t>(off));
    off += p->data.size();
  }
  out->backward_fn = [](TensorNode& o) {
    size_t pos = 0;
    for (auto& p : o.parents) {
      ensure_grad(p.get());
      for (size_t i = 0; i < p->data.size(); ++i) {
        p->grad[i] += o.grad[pos + i];
      }
      pos += p->data.size();
    }
  };
  return Tensor::wrap(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw ContractError("concat_cols: no inputs");
  }
  const int rows = parts[0].ndim() == 2 ? parts[0].dim(0) : -1;
  int total_cols = 0;
  std::vector<NodePtr> parents;
  std::vector<int> widths;
  for (const Tensor& p : parts) {
    check_defined(p, "concat_cols");
    if (p.ndim() != 2 || p.dim(0) != rows) {
      throw DimensionError("concat_cols: row mismatch " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total_cols += p.dim(1);
    widths.push_back(p.dim(1));
    parents.push_back(p.impl());
  }
  auto out = make_node({rows, total_cols}, parents);
  int col_off = 0;
  for (size_t pi = 0; pi < parents.size(); ++pi) {
    const int w = widths[pi];
    for (int i = 0; i < rows; ++i) {
      const double* src = parents[pi]->data.data() + static_cast<int64_t>(i) * w;
      double* dst =
          out->data.data() + static_cast<int64_t>(i) * total_cols + col_off;
      std::copy(src, src + w, dst);
    }
    col_off += w;
  }
  out->backward_fn = [rows, total_cols, widths](TensorNode& o) {
    int off = 0;
    for (size_t pi = 0; pi < o.parents.size(); ++pi) {
      auto* p = o.parents[pi].get();
      ensure_grad(p);
      const int w = widths[pi];
      for (int i = 0; i < rows; ++i) {
        const double* g =
            o.grad.data() + static_cast<int64_t>(i) * total_cols + off;
        double* dst = p->grad.data() + static_cast<int64_t>(i) * w;
        for (int j = 0; j < w; ++j) {
          dst[j] += g[j];
        }
      }
      off += w;
    }
  };
  return Tensor::wrap(out);
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  check_defined(x, "slice_cols");
  if (x.ndim() != 2) {
    throw DimensionError("slice_cols: expected 2D, got " +
                         shape_str(x.shape()));
  }
  const int rows = x.dim(0), cols = x.dim(1);
  if (start < 0 || len <= 0 || start + len > cols) {
    throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for " +
                         shape_str(x.shape()));
  }
  auto xn = x.impl();
  auto out = make_node({rows, len}, {xn});
  for (int i = 0; i < rows; ++i) {
    const double* src =
        xn->data.data() + static_cast<int64_t>(i) * cols + start;
    std::copy(src, src + len, out->data.data() + static_cast<int64_t>(i) * len);
  }
  out->backward_fn = [xn = xn.get(), rows, cols, start, len](TensorNode& o) {
    ensure_grad(xn);
    for (int i = 0; i < rows; ++i) {
      const double* g = o.grad.data() + static_cast<int64_t>(i) * len;
      double* dst = xn->grad.data() + static_cast<int64_t>(i) * cols + start;
      for (int j = 0; j < len; ++j) {
        dst[j] += g[j];
      }
    }
  };
  return Tensor::wrap(out);
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  check_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(shape) + " changes element count");
  }
  auto xn = x.impl();
  auto out = make_node(std::move(shape), {xn});
  out->data = xn->data;
  out->backward_fn = [xn = xn.get()](TensorNode& o) {
    ensure_grad(xn);
    for (size_t i = 0; i < o.grad.size(); ++i) {
      xn->grad[i] += o.grad[i];
    }
  };
  return Tensor::wrap(out);
}

// ---- reductions -------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  check_defined(a, "sum_all");
  auto an = a.impl();
  auto out = make_node({1}, {an});
  double s = 0.0;
  for (double v : an->data) {
    s += v;
  }
  out->data[0] = s;
  out->backward_fn = [an = an.get()](TensorNode& o) {
    ensure_grad(an);
    const double g = o.grad[0];
    for (double& d : an->grad) {
      d += g;
    }
  };
  return Tensor::wrap(out);
}

Tensor mean_all(const Tensor& a) {
  check_defined(a, "mean_all");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean_rows(const Tensor& a) {
  check_defined(a, "mean_rows");
  if (a.ndim() != 2) {
    throw DimensionError("mean_rows: expected 2D, got " +
                         shape_str(a.shape()));
  }
  const int rows = a.dim(0), cols = a.dim(1);
  auto an = a.impl();
  auto out = make_node({cols}, {an});
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      out->data[static_cast<size_t>(j)] +=
          an->data[static_cast<size_t>(i) * cols + j];
    }
  }
  for (int j = 0; j < cols; ++j) {
    out->data[static_cast<size_t>(j)] /= static_cast<double>(rows);
  }
  out->backward_fn = [an = an.get(), rows, cols](TensorNode& o) {
    ensure_grad(an);
    const double inv = 1.0 / static_cast<double>(rows);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        an->grad[static_cast<size_t>(i) * cols + j] +=
            o.grad[static_cast<size_t>(j)] * inv;
      }
    }
  };
  return Tensor::wrap(out);
}

Tensor dot(const Tensor& a, const Tensor& b) {
  check_defined(a, "dot");
  check_defined(b, "dot");
  if (a.ndim() != 1 || b.ndim() != 1 || a.dim(0) != b.dim(0)) {
    throw DimensionError("dot: lhs " + shape_str(a.shape()) +
                         " incompatible with rhs " + shape_str(b.shape()));
  }
  auto an = a.impl();
  auto bn = b.impl();
  auto out = make_node({1}, {an, bn});
  double s = 0.0;
  for (size_t i = 0; i < an->data.size(); ++i) {
    s += an->data[i] * bn->data[i];
  }
  out->data[0] = s;
  out->backward_fn = [an = an.get(), bn = bn.get()](TensorNode& o) {
    ensure_grad(an);
    ensure_grad(bn);
    const double g = o.grad[0];
    for (size_t i = 0; i < an->data.size(); ++i) {
      an->grad[i] += g * bn->data[i];
      bn->grad[i] += g * an->data[i];
    }
  };
  return Tensor::wrap(out);
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) {
    throw ContractError("stack_scalars: no inputs");
  }
  std::vector<NodePtr> parents;
  for (const Tensor& s : scalars) {
    check_defined(s, "stack_scalars");
    if (s.numel() != 1) {
      throw DimensionError("stack_scalars: element of shape " +
                           shape_str(s.shape()) + " is not a scalar");
    }
    parents.push_back(s.impl());
  }
  auto out = make_node({static_cast<int>(scalars.size())}, parents);
  for (size_t i = 0; i < parents.size(); ++i) {
    out->data[i] = parents[i]->data[0];
  }
  out->backward_fn = [](TensorNode& o) {
    for (size_t i = 0; i < o.parents.size(); ++i) {
      ensure_grad(o.parents[i].get());
      o.parents[i]->grad[0] += o.grad[i];
    }
  };
  return Tensor::wrap(out);
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  check_defined(x, "dropout");
  if (rate < 0.0 || rate >= 1.0) {
    throw DomainError("dropout: rate " + std::to_string(rate) +
                      " outside [0, 1)");
  }
  if (rate == 0.0) {
    return x;
  }
  auto xn = x.impl();
  auto out = make_node(xn->shape, {xn});
  auto mask = std::make_shared<std::vector<double>>(xn->data.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (size_t i = 0; i < xn->data.size(); ++i) {
    const double m = rng.next_double() < rate ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out->data[i] = xn->data[i] * m;
  }
  out->backward_fn = [xn = xn.get(), mask](TensorNode& o) {
    ensure_grad(xn);
    for (size_t i = 0; i < o.grad.size(); ++i) {
      xn->grad[i] += o.grad[i] * (*mask)[i];
    }
  };
  return Tensor::wrap(out);
}

}  // namespace tricode
