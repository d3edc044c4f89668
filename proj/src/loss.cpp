#include "trisplat/loss.hpp"

namespace trisplat {

using ad::Tensor;

namespace {

// Average-pool taps: each output pixel pulls 4 source pixels at weight 1/4.
std::vector<std::vector<ad::Tap>> pool_taps(int w, int h) {
  std::vector<std::vector<ad::Tap>> taps;
  taps.reserve(static_cast<size_t>(w / 2) * (h / 2));
  for (int y = 0; y < h / 2; ++y)
    for (int x = 0; x < w / 2; ++x)
      taps.push_back({{(2 * y) * w + 2 * x, 0.25},
                      {(2 * y) * w + 2 * x + 1, 0.25},
                      {(2 * y + 1) * w + 2 * x, 0.25},
                      {(2 * y + 1) * w + 2 * x + 1, 0.25}});
  return taps;
}

// Horizontal / vertical forward differences.
std::vector<std::vector<ad::Tap>> diff_taps(int w, int h, bool horizontal) {
  std::vector<std::vector<ad::Tap>> taps;
  if (horizontal) {
    taps.reserve(static_cast<size_t>(w - 1) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x)
        taps.push_back({{y * w + x + 1, 1.0}, {y * w + x, -1.0}});
  } else {
    taps.reserve(static_cast<size_t>(h - 1) * w);
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x)
        taps.push_back({{(y + 1) * w + x, 1.0}, {y * w + x, -1.0}});
  }
  return taps;
}

}  // namespace

Tensor composite_loss_op(ad::Graph& g, Tensor rgba, const Image& target, const LossConfig& cfg,
                         LossTerms* terms) {
  cfg.validate();
  const int w = target.width, h = target.height;
  TS_CHECK(target.channels == 4, "composite_loss: target must be RGBA (alpha = mask)");
  TS_CHECK(rgba.rows() == w * h && rgba.cols() == 4,
           "composite_loss: render / target shape mismatch");

  Eigen::ArrayXd trgb(static_cast<Eigen::Index>(w) * h * 3);
  Eigen::ArrayXd tmask(static_cast<Eigen::Index>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Index p = static_cast<Eigen::Index>(y) * w + x;
      for (int c = 0; c < 3; ++c) trgb[p * 3 + c] = target.at(x, y, c);
      tmask[p] = target.at(x, y, 3);
    }

  Tensor rgb = ad::slice_cols(rgba, 0, 3);
  Tensor alpha = ad::slice_cols(rgba, 3, 4);
  Tensor l2 = ad::mean_all(ad::square(ad::sub(rgb, g.constant(w * h, 3, trgb))));
  Tensor opac = ad::mean_all(ad::square(ad::sub(alpha, g.constant(w * h, 1, tmask))));

  // Multiscale gradient-difference term.
  Tensor cur = rgb;
  Eigen::ArrayXd cur_target = trgb;
  int cw = w, ch = h;
  std::vector<Tensor> scale_terms;
  for (int s = 0; s < cfg.perceptual_scales; ++s) {
    if (s > 0) {
      if (cw < 4 || ch < 4) break;
      auto taps = pool_taps(cw, ch);
      cur = ad::weighted_gather_rows(cur, taps);
      Eigen::ArrayXd pooled(static_cast<Eigen::Index>(taps.size()) * 3);
      for (size_t i = 0; i < taps.size(); ++i)
        for (int c = 0; c < 3; ++c) {
          double acc = 0;
          for (const ad::Tap& t : taps[i]) acc += t.weight * cur_target[t.row * 3 + c];
          pooled[static_cast<Eigen::Index>(i) * 3 + c] = acc;
        }
      cur_target = std::move(pooled);
      cw /= 2;
      ch /= 2;
    }
    for (bool horiz : {true, false}) {
      auto taps = diff_taps(cw, ch, horiz);
      Tensor d = ad::weighted_gather_rows(cur, taps);
      Eigen::ArrayXd dt(static_cast<Eigen::Index>(taps.size()) * 3);
      for (size_t i = 0; i < taps.size(); ++i)
        for (int c = 0; c < 3; ++c)
          dt[static_cast<Eigen::Index>(i) * 3 + c] =
              cur_target[taps[i][0].row * 3 + c] * taps[i][0].weight +
              cur_target[taps[i][1].row * 3 + c] * taps[i][1].weight;
      Tensor diff = ad::sub(d, g.constant(static_cast<int>(taps.size()), 3, dt));
      scale_terms.push_back(ad::mean_all(ad::charbonnier(diff, cfg.charbonnier_eps)));
    }
  }
  Tensor perc = scale_terms[0];
  for (size_t i = 1; i < scale_terms.size(); ++i) perc = ad::add(perc, scale_terms[i]);
  perc = ad::scale(perc, 1.0 / scale_terms.size());

  Tensor total = ad::add(ad::add(ad::scale(l2, cfg.w_l2), ad::scale(perc, cfg.w_perceptual)),
                         ad::scale(opac, cfg.w_opacity));
  if (terms) {
    terms->l2 = l2.scalar();
    terms->perceptual = perc.scalar();
    terms->opacity = opac.scalar();
    terms->total = total.scalar();
  }
  return total;
}

LossWithAdjoint composite_loss(const RenderedImage& render, const Image& target,
                               const LossConfig& cfg) {
  TS_CHECK(render.width == target.width && render.height == target.height,
           "composite_loss: resolution mismatch");
  const int pixels = render.width * render.height;
  Eigen::ArrayXd rgba(static_cast<Eigen::Index>(pixels) * 4);
  for (int p = 0; p < pixels; ++p) {
    for (int c = 0; c < 3; ++c) rgba[static_cast<Eigen::Index>(p) * 4 + c] = render.rgb[p * 3 + c];
    rgba[static_cast<Eigen::Index>(p) * 4 + 3] = render.alpha[p];
  }
  ad::Graph g;
  Tensor in = g.param(pixels, 4, std::move(rgba));
  LossWithAdjoint out;
  Tensor loss = composite_loss_op(g, in, target, cfg, &out.terms);
  g.backward(loss);
  out.adjoint = g.grad_of(in);
  return out;
}

}  // namespace trisplat
