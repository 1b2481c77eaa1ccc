#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tricode/errors.hpp"

namespace tricode {

class Rng;

namespace detail {

// One recorded operation/value in the define-by-run graph. backward_fn reads
// this node's grad and accumulates into the parents' grads; leaves have none.
struct TensorNode {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily (backward) or eagerly (params)
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;
};

}  // namespace detail

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Dense row-major f64 tensor with reverse-mode autodiff.
//
// Copying a Tensor copies the handle, not the storage; ops build a graph of
// shared nodes. backward(loss) visits every node reachable from the loss
// exactly once, in reverse topological order, and *accumulates* into grads;
// calling it twice without zero_grad doubles them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return check().shape; }
  int ndim() const { return static_cast<int>(check().shape.size()); }
  int dim(int i) const { return check().shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(check().data.size()); }

  const std::vector<double>& data() const { return check().data; }
  std::vector<double>& mutable_data() { return check().data; }

  bool requires_grad() const { return check().requires_grad; }
  void set_requires_grad(bool v);

  // Gradient view; allocates zeros on first access.
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  bool has_grad() const { return !check().grad.empty(); }
  void zero_grad();

  // Value of a single-element tensor.
  double item() const;

  std::shared_ptr<detail::TensorNode> impl() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  detail::TensorNode& check() const;
  std::shared_ptr<detail::TensorNode> node_;
};

// Runs reverse-mode accumulation from a scalar loss.
void backward(const Tensor& loss);

// ---- forward ops ----------------------------------------------------------
// Elementwise ops accept equal shapes, or a second operand whose shape is a
// suffix of the first's (broadcast over the leading axes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // 2D x 2D
Tensor transpose(const Tensor& a);                // 2D

// Row-wise over the last axis; a 1D input is treated as a single row.
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);  // DomainError on non-positive input
Tensor exp(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor gelu(const Tensor& a);      // exact erf form
Tensor softplus(const Tensor& a);  // ln(1+e^x), stable at both tails

// Layer normalization over the last axis with learnable gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Row gather / scatter-add backward. Doubles as embedding lookup.
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);
// y[i] = x[i, cols[i]] for 2D x.
Tensor pick_per_row(const Tensor& x, const std::vector<int>& cols);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor reshape(const Tensor& x, std::vector<int> shape);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // (R x C) -> C
Tensor dot(const Tensor& a, const Tensor& b);  // 1D . 1D -> scalar
Tensor stack_scalars(const std::vector<Tensor>& scalars);

// Inverted dropout; rate 0 is a pass-through. Mask is drawn from rng at call
// time, so determinism is the caller's seed discipline.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

}  // namespace tricode
