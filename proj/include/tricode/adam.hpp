#pragma once

#include <string>
#include <vector>

#include "tricode/errors.hpp"
#include "tricode/tensor.hpp"

namespace tricode {

// Ordered registry of named trainable tensors.  Iteration order is insertion
// order, which fixes the parameter order in checkpoints and in the optimizer
// update loop.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  size_t size() const { return names_.size(); }

  void zero_grad();
  int64_t total_scalars() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction.  First and second moment buffers are keyed by
// parameter name so optimizer state survives checkpoint round-trips.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  // Applies one update to every parameter in the set from its current grad.
  // Throws ContractError naming the parameter if its grad buffer is missing
  // or of the wrong length.
  void step(ParamSet& params);

  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

  // For schedules (warmup); moments are unaffected.
  void set_lr(double lr) { config_.lr = lr; }

  // Moment buffers for one parameter; empty vectors before the first step.
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
  };
  const Slot& slot(const std::string& name) const;
  void restore_slot(const std::string& name, Slot slot);
  void set_step_count(int64_t n) { step_count_ = n; }
  std::vector<std::string> slot_names() const;

 private:
  AdamConfig config_;
  int64_t step_count_ = 0;
  std::vector<std::pair<std::string, Slot>> slots_;
  Slot& slot_for(const std::string& name, size_t numel);
};

}  // namespace tricode
