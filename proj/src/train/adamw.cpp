#include "voxtr/train/adamw.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace voxtr {

void AdamW::step(ParamStore& params, double lr_override) {
  const double lr = lr_override < 0.0 ? cfg_.learning_rate : lr_override;
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

  for (auto& [name, var] : params.all()) {
    if (!var->requires_grad) continue;
    Tensor& p = var->value;
    Tensor& m = m_.try_emplace(name, Tensor(p.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(p.shape())).first->second;
    const bool has_grad = var->grad.numel() == p.numel();
    for (long i = 0; i < p.numel(); ++i) {
      const double g = has_grad ? var->grad[i] : 0.0;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) + cfg_.weight_decay * p[i]);
    }
  }
}

void AdamW::save_state(TensorArchive& archive) const {
  for (const auto& [name, t] : m_) archive.put("opt.m." + name, t);
  for (const auto& [name, t] : v_) archive.put("opt.v." + name, t);
  archive.put_i64("opt.step", {static_cast<int64_t>(step_)}, {1});
}

void AdamW::load_state(const TensorArchive& archive) {
  m_.clear();
  v_.clear();
  step_ = archive.contains("opt.step") ? static_cast<long>(archive.get_i64("opt.step")[0]) : 0;
  for (const std::string& name : archive.names()) {
    if (name.rfind("opt.m.", 0) == 0) m_[name.substr(6)] = archive.get(name);
    if (name.rfind("opt.v.", 0) == 0) v_[name.substr(6)] = archive.get(name);
  }
}

}  // namespace voxtr
