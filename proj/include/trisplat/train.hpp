#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "trisplat/checkpoint.hpp"
#include "trisplat/imperfect.hpp"
#include "trisplat/loss.hpp"
#include "trisplat/model.hpp"
#include "trisplat/optim.hpp"
#include "trisplat/scene.hpp"

namespace trisplat {

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  NoiseConfig noise;

  int stage1_steps = 400;
  int stage2_steps = 2000;
  int finetune_steps = 500;
  int stage1_views_min = 1, stage1_views_max = 16;
  int stage2_views_min = 1, stage2_views_max = 32;
  int targets_per_step = 4;
  int stage1_render_size = 32;
  int stage1_samples_per_ray = 24;
  Eigen::Vector3d background{1.0, 1.0, 1.0};
  int log_every = 25;
  uint64_t seed = 1234;

  void validate() const {
    model.validate();
    loss.validate();
    optim.validate();
    noise.validate();
    TS_CHECK(stage1_views_min >= 1 && stage1_views_min <= stage1_views_max,
             "TrainConfig: bad stage-1 view range");
    TS_CHECK(stage2_views_min >= 1 && stage2_views_min <= stage2_views_max,
             "TrainConfig: bad stage-2 view range");
    TS_CHECK(targets_per_step >= 1, "TrainConfig: need at least one target view");
  }
};

// Everything a phase needs to continue bit-exactly after a checkpoint
// round-trip: weights, optimizer moments, counters, and the RNG engine.
struct TrainState {
  ad::ParamStore params;
  GradMap opt_m, opt_v;
  long opt_t = 0;
  long step = 0;  // within the current phase
  std::string phase = "stage1";
  Rng rng;
};

// One draw with p(view) proportional to max(cos(elevation), 0.1).
int weighted_elevation_sampling(const std::vector<PosedView>& views, Rng& rng);
// k distinct draws by repeating the weighted draw without replacement.
std::vector<int> sample_views_weighted(const std::vector<PosedView>& views, int k, Rng& rng);

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::ostream* log = nullptr) : cfg_(cfg), log_(log) {
    cfg.validate();
  }

  const TrainConfig& config() const { return cfg_; }

  // Fresh stage-1 state (encoder + decoder initialized from the seed).
  TrainState start_stage1(uint64_t seed) const;
  // Stage-2 state from a finished stage 1: encoder weights carry over, the
  // decoder re-initializes fresh and receives the trunk/color/opacity
  // transfer. Optimizer and step counters reset.
  TrainState to_stage2(const TrainState& s1) const;
  // Fine-tuning continues the stage-2 weights with reset counters.
  TrainState to_finetune(const TrainState& s2) const;
  // Ablation path: stage 2 from scratch (no pretraining, no transfer).
  TrainState start_stage2_fresh(uint64_t seed) const;

  // Runs up to max_steps of the state's phase (all remaining when -1).
  void run(const Dataset& data, TrainState& state, int max_steps = -1);

  // Loss of the current weights on a fixed probe batch (no optimizer side
  // effects); used by ablation comparisons and tests.
  double probe_loss(const Dataset& data, const TrainState& state, uint64_t probe_seed) const;

  void save(const std::string& path, const TrainState& state) const;
  TrainState load(const std::string& path) const;

 private:
  int phase_total_steps(const std::string& phase) const;
  double phase_lr(const std::string& phase) const;
  void step_stage1(const Dataset& data, TrainState& state, AdamW& opt);
  void step_stage2(const Dataset& data, TrainState& state, AdamW& opt, bool imperfect);
  void log_step(const TrainState& state, const LossTerms& terms, double lr, double gnorm);

  TrainConfig cfg_;
  std::ostream* log_ = nullptr;
};

// Feed-forward view synthesis quality: reconstruct from the given input
// views, render at the eval views' cameras, mean PSNR against their images.
double eval_psnr(const ReconModel& model, const ad::ParamStore& params,
                 const std::vector<PosedView>& inputs, const std::vector<PosedView>& eval_views,
                 const Eigen::Vector3d& background);

}  // namespace trisplat
