#include "trisplat/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

namespace trisplat {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  TS_CHECK(j.is_object(), "config: " + where + " must be an object");
  for (const auto& [key, _] : j.items())
    TS_CHECK(allowed.count(key) > 0, "config: unknown key '" + key + "' in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_model(const json& j, ModelConfig& m) {
  check_keys(j, {"image_size", "patch_size", "dim", "enc_layers", "tri_layers", "heads",
                 "plane_res", "plane_channels", "plane_patch", "max_views", "decoder_hidden",
                 "decoder_layers", "grid_n", "alpha"},
             "model");
  get_if(j, "image_size", m.encoder.image_size);
  get_if(j, "patch_size", m.encoder.patch_size);
  get_if(j, "dim", m.encoder.dim);
  get_if(j, "enc_layers", m.encoder.enc_layers);
  get_if(j, "tri_layers", m.encoder.tri_layers);
  get_if(j, "heads", m.encoder.heads);
  get_if(j, "plane_res", m.encoder.plane_res);
  get_if(j, "plane_channels", m.encoder.plane_channels);
  get_if(j, "plane_patch", m.encoder.plane_patch);
  get_if(j, "max_views", m.encoder.max_views);
  get_if(j, "decoder_hidden", m.decoder.hidden);
  get_if(j, "decoder_layers", m.decoder.layers);
  get_if(j, "grid_n", m.grid_n);
  get_if(j, "alpha", m.activation.alpha);
  m.decoder.feature_dim = 3 * m.encoder.plane_channels;
}

void parse_loss(const json& j, LossConfig& l) {
  check_keys(j, {"w_l2", "w_perceptual", "w_opacity", "perceptual_scales", "charbonnier_eps"},
             "loss");
  get_if(j, "w_l2", l.w_l2);
  get_if(j, "w_perceptual", l.w_perceptual);
  get_if(j, "w_opacity", l.w_opacity);
  get_if(j, "perceptual_scales", l.perceptual_scales);
  get_if(j, "charbonnier_eps", l.charbonnier_eps);
}

void parse_optim(const json& j, OptimConfig& o) {
  check_keys(j, {"lr_stage1", "lr_stage2", "lr_finetune", "warmup_steps", "grad_clip",
                 "weight_decay", "beta1", "beta2", "eps"},
             "optim");
  get_if(j, "lr_stage1", o.lr_stage1);
  get_if(j, "lr_stage2", o.lr_stage2);
  get_if(j, "lr_finetune", o.lr_finetune);
  get_if(j, "warmup_steps", o.warmup_steps);
  get_if(j, "grad_clip", o.grad_clip);
  get_if(j, "weight_decay", o.weight_decay);
  get_if(j, "beta1", o.beta1);
  get_if(j, "beta2", o.beta2);
  get_if(j, "eps", o.eps);
}

void parse_noise(const json& j, NoiseConfig& n) {
  check_keys(j, {"p_position", "p_color", "p_opacity", "p_scale", "level_position", "level_color",
                 "level_opacity", "level_scale", "cube_frac_min", "cube_frac_max"},
             "noise");
  get_if(j, "p_position", n.p_position);
  get_if(j, "p_color", n.p_color);
  get_if(j, "p_opacity", n.p_opacity);
  get_if(j, "p_scale", n.p_scale);
  get_if(j, "level_position", n.level_position);
  get_if(j, "level_color", n.level_color);
  get_if(j, "level_opacity", n.level_opacity);
  get_if(j, "level_scale", n.level_scale);
  get_if(j, "cube_frac_min", n.cube_frac_min);
  get_if(j, "cube_frac_max", n.cube_frac_max);
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j, {"stage1_steps", "stage2_steps", "finetune_steps", "stage1_views_min",
                 "stage1_views_max", "stage2_views_min", "stage2_views_max", "targets_per_step",
                 "stage1_render_size", "stage1_samples_per_ray", "background", "log_every",
                 "seed"},
             "train");
  get_if(j, "stage1_steps", t.stage1_steps);
  get_if(j, "stage2_steps", t.stage2_steps);
  get_if(j, "finetune_steps", t.finetune_steps);
  get_if(j, "stage1_views_min", t.stage1_views_min);
  get_if(j, "stage1_views_max", t.stage1_views_max);
  get_if(j, "stage2_views_min", t.stage2_views_min);
  get_if(j, "stage2_views_max", t.stage2_views_max);
  get_if(j, "targets_per_step", t.targets_per_step);
  get_if(j, "stage1_render_size", t.stage1_render_size);
  get_if(j, "stage1_samples_per_ray", t.stage1_samples_per_ray);
  get_if(j, "log_every", t.log_every);
  get_if(j, "seed", t.seed);
  if (j.contains("background")) {
    const auto& bg = j.at("background");
    TS_CHECK(bg.is_array() && bg.size() == 3, "config: train.background must be [r,g,b]");
    for (int i = 0; i < 3; ++i) t.background[i] = bg[i].get<double>();
  }
}

void parse_match(const json& j, MatchConfig& m) {
  check_keys(j, {"max_keypoints", "patch_radius", "harris_k", "response_rel_threshold",
                 "nms_radius", "ratio"},
             "match");
  get_if(j, "max_keypoints", m.max_keypoints);
  get_if(j, "patch_radius", m.patch_radius);
  get_if(j, "harris_k", m.harris_k);
  get_if(j, "response_rel_threshold", m.response_rel_threshold);
  get_if(j, "nms_radius", m.nms_radius);
  get_if(j, "ratio", m.ratio);
}

void parse_rig(const json& j, RigConfig& r) {
  check_keys(j, {"width", "height", "fov_deg", "radius"}, "scene");
  get_if(j, "width", r.width);
  get_if(j, "height", r.height);
  get_if(j, "fov_deg", r.fov_deg);
  get_if(j, "radius", r.radius);
}

}  // namespace

WorkbenchConfig parse_config_json(const std::string& text) {
  WorkbenchConfig cfg;
  json j = json::parse(text);
  check_keys(j, {"model", "loss", "optim", "noise", "train", "match", "scene"}, "top level");
  if (j.contains("model")) parse_model(j.at("model"), cfg.train.model);
  if (j.contains("loss")) parse_loss(j.at("loss"), cfg.train.loss);
  if (j.contains("optim")) parse_optim(j.at("optim"), cfg.train.optim);
  if (j.contains("noise")) parse_noise(j.at("noise"), cfg.train.noise);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("match")) parse_match(j.at("match"), cfg.match);
  if (j.contains("scene")) parse_rig(j.at("scene"), cfg.rig);
  // Keep the model image size and the rig in agreement.
  TS_CHECK(cfg.rig.width == cfg.train.model.encoder.image_size &&
               cfg.rig.height == cfg.train.model.encoder.image_size,
           "config: scene render size must match model.image_size");
  cfg.train.validate();
  return cfg;
}

WorkbenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  TS_CHECK(in.good(), "config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_json(text);
}

}  // namespace trisplat
