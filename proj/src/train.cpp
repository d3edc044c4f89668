#include "trisplat/train.hpp"

#include <cmath>
#include <ostream>

#include "trisplat/metrics.hpp"
#include "trisplat/volume.hpp"

namespace trisplat {

int weighted_elevation_sampling(const std::vector<PosedView>& views, Rng& rng) {
  TS_CHECK(!views.empty(), "weighted_elevation_sampling: no views");
  std::vector<double> w(views.size());
  double total = 0.0;
  for (size_t i = 0; i < views.size(); ++i) {
    const double el = views[i].camera.elevation_deg() * EIGEN_PI / 180.0;
    w[i] = std::max(std::cos(el), 0.1);
    total += w[i];
  }
  double u = rand_uniform(rng, 0.0, total);
  for (size_t i = 0; i < views.size(); ++i) {
    u -= w[i];
    if (u <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(views.size()) - 1;
}

std::vector<int> sample_views_weighted(const std::vector<PosedView>& views, int k, Rng& rng) {
  TS_CHECK(k >= 1 && k <= static_cast<int>(views.size()),
           "sample_views_weighted: k out of range");
  std::vector<int> remaining(views.size());
  for (size_t i = 0; i < views.size(); ++i) remaining[i] = static_cast<int>(i);
  std::vector<int> picked;
  for (int draw = 0; draw < k; ++draw) {
    std::vector<PosedView> pool;
    pool.reserve(remaining.size());
    for (int idx : remaining) pool.push_back(views[idx]);
    const int local = weighted_elevation_sampling(pool, rng);
    picked.push_back(remaining[local]);
    remaining.erase(remaining.begin() + local);
  }
  return picked;
}

TrainState Trainer::start_stage1(uint64_t seed) const {
  TrainState s;
  s.rng.seed(seed);
  ReconModel model(cfg_.model);
  model.init_params(s.params, s.rng);
  s.params.quantize_f32();
  s.phase = "stage1";
  return s;
}

TrainState Trainer::to_stage2(const TrainState& s1) const {
  TrainState s;
  s.rng = s1.rng;
  s.params = s1.params;
  // Fresh decoder, then the pretraining transfer for trunk + color/opacity.
  ad::ParamStore fresh;
  ReconModel model(cfg_.model);
  model.decoder.init_params(fresh, s.rng);
  for (auto& [name, e] : fresh.entries) s.params.at(name).value = e.value;
  transfer_nerf_heads(s1.params, "decoder", s.params, "decoder");
  s.params.quantize_f32();
  s.phase = "stage2";
  return s;
}

TrainState Trainer::to_finetune(const TrainState& s2) const {
  TrainState s;
  s.rng = s2.rng;
  s.params = s2.params;
  s.phase = "finetune";
  return s;
}

TrainState Trainer::start_stage2_fresh(uint64_t seed) const {
  TrainState s = start_stage1(seed);
  s.phase = "stage2";
  return s;
}

int Trainer::phase_total_steps(const std::string& phase) const {
  if (phase == "stage1") return cfg_.stage1_steps;
  if (phase == "stage2") return cfg_.stage2_steps;
  if (phase == "finetune") return cfg_.finetune_steps;
  fail("Trainer: unknown phase " + phase);
}

double Trainer::phase_lr(const std::string& phase) const {
  if (phase == "stage1") return cfg_.optim.lr_stage1;
  if (phase == "stage2") return cfg_.optim.lr_stage2;
  if (phase == "finetune") return cfg_.optim.lr_finetune;
  fail("Trainer: unknown phase " + phase);
}

void Trainer::log_step(const TrainState& state, const LossTerms& terms, double lr, double gnorm) {
  if (!log_) return;
  if (state.step % cfg_.log_every != 0 && state.step != phase_total_steps(state.phase)) return;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "step=%ld phase=%s loss=%.17g l2=%.17g perceptual=%.17g opacity=%.17g "
                "lr=%.17g grad_norm=%.17g",
                state.step, state.phase.c_str(), terms.total, terms.l2, terms.perceptual,
                terms.opacity, lr, gnorm);
  (*log_) << buf << "\n";
  log_->flush();
}

namespace {

Camera scaled_camera(const Camera& cam, int size) {
  Camera out = cam;
  const double sx = static_cast<double>(size) / cam.width;
  const double sy = static_cast<double>(size) / cam.height;
  out.width = size;
  out.height = size;
  out.fx *= sx;
  out.fy *= sy;
  out.cx *= sx;
  out.cy *= sy;
  return out;
}

GradMap collect_grads(ad::Graph& g, const ad::ParamBinder& bind) {
  GradMap grads;
  for (const auto& [name, tensor] : bind.bound()) grads.emplace(name, g.grad_of(tensor));
  return grads;
}

}  // namespace

void Trainer::step_stage1(const Dataset& data, TrainState& state, AdamW& opt) {
  const SceneData& scene = data[rand_int(state.rng, 0, static_cast<int>(data.size()) - 1)];
  const int n_views = static_cast<int>(scene.views.size());
  const int k = rand_int(state.rng, cfg_.stage1_views_min, std::min(cfg_.stage1_views_max, n_views));
  std::vector<int> input_idx = sample_views_weighted(scene.views, k, state.rng);
  std::vector<int> target_idx =
      sample_views_weighted(scene.views, std::min(cfg_.targets_per_step, n_views), state.rng);

  std::vector<PosedView> inputs;
  for (int i : input_idx) inputs.push_back(scene.views[i]);

  ReconModel model(cfg_.model);
  ad::Graph g;
  ad::ParamBinder bind(g, state.params);
  auto planes = model.encoder.forward(g, bind, inputs);

  VolumeRenderOptions vopt;
  vopt.reference_step = 2.0 / cfg_.model.grid_n;
  LossTerms mean_terms;
  ad::Tensor total{};
  for (size_t t = 0; t < target_idx.size(); ++t) {
    const PosedView& tv = scene.views[target_idx[t]];
    Camera cam = scaled_camera(tv.camera, cfg_.stage1_render_size);
    ad::Tensor rgba = render_volume_op(g, bind, planes, cfg_.model.encoder.plane_res,
                                       model.decoder, cam, cfg_.stage1_samples_per_ray,
                                       cfg_.background, vopt);
    const int factor = tv.image.width / cfg_.stage1_render_size;
    Image target = box_downsample(tv.image, factor);
    LossTerms terms;
    ad::Tensor l = composite_loss_op(g, rgba, target, cfg_.loss, &terms);
    mean_terms.total += terms.total / target_idx.size();
    mean_terms.l2 += terms.l2 / target_idx.size();
    mean_terms.perceptual += terms.perceptual / target_idx.size();
    mean_terms.opacity += terms.opacity / target_idx.size();
    total = t == 0 ? l : ad::add(total, l);
  }
  total = ad::scale(total, 1.0 / target_idx.size());
  g.backward(total);

  GradMap grads = collect_grads(g, bind);
  const double gnorm = clip_global_norm(grads, cfg_.optim.grad_clip);
  const double lr = lr_at(state.step, phase_lr(state.phase), cfg_.optim.warmup_steps,
                          phase_total_steps(state.phase));
  opt.step(state.params, grads, lr);
  ++state.step;
  log_step(state, mean_terms, lr, gnorm);
}

void Trainer::step_stage2(const Dataset& data, TrainState& state, AdamW& opt, bool imperfect) {
  const SceneData& scene = data[rand_int(state.rng, 0, static_cast<int>(data.size()) - 1)];
  const int n_views = static_cast<int>(scene.views.size());

  ReconModel model(cfg_.model);
  std::vector<PosedView> inputs;
  std::vector<const PosedView*> targets;
  std::vector<PosedView> target_storage;

  if (imperfect) {
    SimulateConfig scfg;
    scfg.m_max = cfg_.stage2_views_max;
    scfg.target_count = cfg_.targets_per_step;
    scfg.background = cfg_.background;
    ImperfectBatch batch =
        simulate_imperfect_inputs(model, state.params, scene.views, state.rng, cfg_.noise, scfg);
    inputs = std::move(batch.inputs);
    target_storage = std::move(batch.targets);
    for (const PosedView& v : target_storage) targets.push_back(&v);
  } else {
    const int k =
        rand_int(state.rng, cfg_.stage2_views_min, std::min(cfg_.stage2_views_max, n_views));
    for (int i : sample_views_weighted(scene.views, k, state.rng)) inputs.push_back(scene.views[i]);
    for (int i :
         sample_views_weighted(scene.views, std::min(cfg_.targets_per_step, n_views), state.rng))
      targets.push_back(&scene.views[i]);
  }

  ad::Graph g;
  ad::ParamBinder bind(g, state.params);
  auto planes = model.encoder.forward(g, bind, inputs);
  ad::Tensor feats = sample_features_op(planes, cfg_.model.encoder.plane_res, model.grid.positions);
  RawFields raw = model.decoder.forward(bind, feats);
  GaussianFields fields = activate_fields(g, raw, model.grid.positions, cfg_.model.activation);

  LossTerms mean_terms;
  ad::Tensor total{};
  for (size_t t = 0; t < targets.size(); ++t) {
    const PosedView& tv = *targets[t];
    ad::Tensor rgba = rasterize_op(fields.position, fields.color, fields.opacity, fields.scale,
                                   fields.rotation, tv.camera, cfg_.background);
    LossTerms terms;
    ad::Tensor l = composite_loss_op(g, rgba, tv.image, cfg_.loss, &terms);
    mean_terms.total += terms.total / targets.size();
    mean_terms.l2 += terms.l2 / targets.size();
    mean_terms.perceptual += terms.perceptual / targets.size();
    mean_terms.opacity += terms.opacity / targets.size();
    total = t == 0 ? l : ad::add(total, l);
  }
  total = ad::scale(total, 1.0 / targets.size());
  g.backward(total);

  GradMap grads = collect_grads(g, bind);
  const double gnorm = clip_global_norm(grads, cfg_.optim.grad_clip);
  const double lr = lr_at(state.step, phase_lr(state.phase), cfg_.optim.warmup_steps,
                          phase_total_steps(state.phase));
  opt.step(state.params, grads, lr);
  ++state.step;
  log_step(state, mean_terms, lr, gnorm);
}

void Trainer::run(const Dataset& data, TrainState& state, int max_steps) {
  TS_CHECK(!data.empty(), "Trainer::run: empty dataset");
  for (const SceneData& s : data)
    TS_CHECK(static_cast<int>(s.views.size()) >= cfg_.targets_per_step,
             "Trainer::run: scene " + s.name + " has too few views");
  AdamW opt(cfg_.optim);
  opt.restore(state.opt_m, state.opt_v, state.opt_t);

  const int total = phase_total_steps(state.phase);
  int budget = max_steps < 0 ? total - static_cast<int>(state.step) : max_steps;
  while (budget > 0 && state.step < total) {
    if (state.phase == "stage1")
      step_stage1(data, state, opt);
    else
      step_stage2(data, state, opt, state.phase == "finetune");
    --budget;
  }
  state.opt_m = opt.first_moments();
  state.opt_v = opt.second_moments();
  state.opt_t = opt.step_count();
}

double Trainer::probe_loss(const Dataset& data, const TrainState& state,
                           uint64_t probe_seed) const {
  Rng rng(probe_seed);
  const SceneData& scene = data[rand_int(rng, 0, static_cast<int>(data.size()) - 1)];
  const int k = std::min(8, static_cast<int>(scene.views.size()));
  std::vector<PosedView> inputs;
  for (int i : sample_views_weighted(scene.views, k, rng)) inputs.push_back(scene.views[i]);
  std::vector<int> target_idx = sample_views_weighted(
      scene.views, std::min(cfg_.targets_per_step, static_cast<int>(scene.views.size())), rng);

  ReconModel model(cfg_.model);
  ad::Graph g(/*grad_enabled=*/false);
  ad::ParamBinder bind(g, state.params);
  auto planes = model.encoder.forward(g, bind, inputs);
  ad::Tensor feats = sample_features_op(planes, cfg_.model.encoder.plane_res, model.grid.positions);
  RawFields raw = model.decoder.forward(bind, feats);
  GaussianFields fields = activate_fields(g, raw, model.grid.positions, cfg_.model.activation);
  double total = 0.0;
  for (int t : target_idx) {
    const PosedView& tv = scene.views[t];
    ad::Tensor rgba = rasterize_op(fields.position, fields.color, fields.opacity, fields.scale,
                                   fields.rotation, tv.camera, cfg_.background);
    LossTerms terms;
    composite_loss_op(g, rgba, tv.image, cfg_.loss, &terms);
    total += terms.total / target_idx.size();
  }
  return total;
}

void Trainer::save(const std::string& path, const TrainState& state) const {
  CheckpointMeta meta;
  meta.step = state.step;
  meta.opt_t = state.opt_t;
  meta.phase = state.phase;
  meta.rng_state = rng_to_string(state.rng);
  save_checkpoint(path, state.params, state.opt_m, state.opt_v, meta);
}

TrainState Trainer::load(const std::string& path) const {
  Checkpoint ck = load_checkpoint(path);
  TrainState s;
  s.params = std::move(ck.params);
  s.opt_m = std::move(ck.opt_m);
  s.opt_v = std::move(ck.opt_v);
  s.opt_t = ck.meta.opt_t;
  s.step = ck.meta.step;
  s.phase = ck.meta.phase;
  s.rng = rng_from_string(ck.meta.rng_state);
  return s;
}

double eval_psnr(const ReconModel& model, const ad::ParamStore& params,
                 const std::vector<PosedView>& inputs, const std::vector<PosedView>& eval_views,
                 const Eigen::Vector3d& background) {
  TS_CHECK(!eval_views.empty(), "eval_psnr: no eval views");
  GaussianCloud cloud = model.reconstruct(inputs, params);
  double total = 0.0;
  for (const PosedView& v : eval_views) {
    RenderedImage img = rasterize(cloud, v.camera, background);
    total += psnr(img, v.image);
  }
  return total / eval_views.size();
}

}  // namespace trisplat
