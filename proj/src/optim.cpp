#include "trisplat/optim.hpp"

#include <cmath>

namespace trisplat {

double lr_at(long step, double base_lr, long warmup_steps, long total_steps) {
  TS_CHECK(step >= 0, "lr_at: negative step");
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  const double span = static_cast<double>(total_steps - warmup_steps);
  const double frac = span > 0 ? static_cast<double>(step - warmup_steps) / span : 1.0;
  return base_lr * 0.5 * (1.0 + std::cos(EIGEN_PI * frac));
}

double clip_global_norm(GradMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads) sq += g.square().sum();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [_, g] : grads) g *= s;
  }
  return norm;
}

void AdamW::step(ad::ParamStore& params, const GradMap& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, grad] : grads) {
    ad::ParamEntry& p = params.at(name);
    TS_CHECK(grad.size() == p.value.size(), "AdamW: gradient size mismatch for " + name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      mit = m_.emplace(name, Eigen::ArrayXd::Zero(grad.size())).first;
      v_.emplace(name, Eigen::ArrayXd::Zero(grad.size()));
    }
    Eigen::ArrayXd& m = mit->second;
    Eigen::ArrayXd& v = v_[name];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.square();
    const Eigen::ArrayXd m_hat = m / bc1;
    const Eigen::ArrayXd v_hat = v / bc2;
    p.value -= lr * (m_hat / (v_hat.sqrt() + cfg_.eps));
    if (p.decay && cfg_.weight_decay > 0.0) p.value -= lr * cfg_.weight_decay * p.value;
    // Keep the whole training state exactly float32-representable.
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m[i] = static_cast<double>(static_cast<float>(m[i]));
      v[i] = static_cast<double>(static_cast<float>(v[i]));
    }
  }
  params.quantize_f32();
}

}  // namespace trisplat
