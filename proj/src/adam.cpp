#include "tricode/adam.hpp"

#include <algorithm>
#include <cmath>

namespace tricode {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  if (contains(name)) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  if (!t.defined()) {
    throw ContractError("parameter '" + name + "' is undefined");
  }
  t.set_requires_grad(true);
  names_.push_back(name);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParamSet::get(const std::string& name) {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      return tensors_[i];
    }
  }
  throw ContractError("no parameter named '" + name + "'");
}

const Tensor& ParamSet::get(const std::string& name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

bool ParamSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

void ParamSet::zero_grad() {
  for (Tensor& t : tensors_) {
    // mutable_grad allocates on first use, so every parameter has a (zero)
    // gradient buffer even when no loss term reaches it.
    auto& g = t.mutable_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
}

int64_t ParamSet::total_scalars() const {
  int64_t n = 0;
  for (const Tensor& t : tensors_) {
    n += t.numel();
  }
  return n;
}

Adam::Adam(AdamConfig config) : config_(config) {}

Adam::Slot& Adam::slot_for(const std::string& name, size_t numel) {
  for (auto& [slot_name, slot] : slots_) {
    if (slot_name == name) {
      if (slot.m.size() != numel) {
        throw ContractError("optimizer state for '" + name + "' has " +
                            std::to_string(slot.m.size()) +
                            " scalars, parameter has " + std::to_string(numel));
      }
      return slot;
    }
  }
  slots_.emplace_back(name, Slot{std::vector<double>(numel, 0.0),
                                 std::vector<double>(numel, 0.0)});
  return slots_.back().second;
}

void Adam::step(ParamSet& params) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (const std::string& name : params.names()) {
    Tensor& p = params.get(name);
    if (!p.has_grad() || p.grad().size() != p.data().size()) {
      throw ContractError("parameter '" + name + "' has no gradient");
    }
    Slot& s = slot_for(name, p.data().size());
    auto& data = p.mutable_data();
    const auto& grad = p.grad();
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      s.m[i] = config_.beta1 * s.m[i] + (1.0 - config_.beta1) * g;
      s.v[i] = config_.beta2 * s.v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

const Adam::Slot& Adam::slot(const std::string& name) const {
  for (const auto& [slot_name, slot] : slots_) {
    if (slot_name == name) {
      return slot;
    }
  }
  throw ContractError("no optimizer state for '" + name + "'");
}

void Adam::restore_slot(const std::string& name, Slot slot) {
  if (slot.m.size() != slot.v.size()) {
    throw ContractError("optimizer state for '" + name +
                        "' has mismatched moment lengths");
  }
  for (auto& [slot_name, existing] : slots_) {
    if (slot_name == name) {
      existing = std::move(slot);
      return;
    }
  }
  slots_.emplace_back(name, std::move(slot));
}

std::vector<std::string> Adam::slot_names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, slot] : slots_) {
    out.push_back(name);
  }
  return out;
}

}  // namespace tricode
