#pragma once

#include <map>
#include <string>

#include "trisplat/ad/tensor.hpp"

namespace trisplat {

struct OptimConfig {
  double lr_stage1 = 2e-4;
  double lr_stage2 = 2e-4;
  double lr_finetune = 2e-5;
  int warmup_steps = 100;  // desk preset; reference schedule warms up for 3000
  double grad_clip = 1.0;
  double weight_decay = 0.05;  // skipped for biases / normalization parameters
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;

  void validate() const {
    TS_CHECK(lr_stage1 > 0 && lr_stage2 > 0 && lr_finetune > 0, "OptimConfig: lr must be > 0");
    TS_CHECK(warmup_steps >= 0, "OptimConfig: warmup must be >= 0");
  }
};

// Linear warmup 0 -> base_lr over warmup steps, then cosine decay to 0 at
// total_steps.
double lr_at(long step, double base_lr, long warmup_steps, long total_steps);

using GradMap = std::map<std::string, Eigen::ArrayXd>;

// Scales all gradients so the global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(GradMap& grads, double max_norm);

// Decoupled-weight-decay Adam. Moments are stored per parameter name and
// float32-quantized after each step so checkpoints round-trip bitwise.
class AdamW {
 public:
  explicit AdamW(const OptimConfig& cfg) : cfg_(cfg) { cfg.validate(); }

  void step(ad::ParamStore& params, const GradMap& grads, double lr);

  long step_count() const { return t_; }
  const GradMap& first_moments() const { return m_; }
  const GradMap& second_moments() const { return v_; }
  // Checkpoint restore.
  void restore(GradMap m, GradMap v, long t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  OptimConfig cfg_;
  GradMap m_, v_;
  long t_ = 0;
};

}  // namespace trisplat
