#include "gs4c/appearance.hpp"

#include <cmath>

#include "gs4c/common.hpp"

namespace gs4c {

VecX Mlp::forward(const VecX& x, std::vector<VecX>* inputs) const {
  VecX h = x;
  for (size_t l = 0; l < layers.size(); ++l) {
    if (inputs) inputs->push_back(h);
    VecX z = layers[l].weights * h + layers[l].bias;
    if (l + 1 < layers.size()) z = z.cwiseMax(0.0);  // ReLU on hidden layers
    h = std::move(z);
  }
  return h;
}

VecX Mlp::backward(const std::vector<VecX>& inputs, const VecX& d_out, std::vector<double>& grads,
                   size_t& offset) const {
  // Walk layers in reverse; `offset` points at this MLP's first parameter.
  std::vector<size_t> layer_offsets(layers.size());
  size_t pos = offset;
  for (size_t l = 0; l < layers.size(); ++l) {
    layer_offsets[l] = pos;
    pos += static_cast<size_t>(layers[l].weights.size()) + layers[l].bias.size();
  }
  offset = pos;

  VecX g = d_out;
  for (size_t l = layers.size(); l-- > 0;) {
    const MlpLayer& layer = layers[l];
    const VecX& x = inputs[l];
    if (l + 1 < layers.size()) {
      // gradient through ReLU: recompute the pre-activation sign
      VecX z = layer.weights * x + layer.bias;
      for (int i = 0; i < g.size(); ++i)
        if (z[i] <= 0.0) g[i] = 0.0;
    }
    double* wg = grads.data() + layer_offsets[l];
    const int rows = static_cast<int>(layer.weights.rows());
    const int cols = static_cast<int>(layer.weights.cols());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) wg[r * cols + c] += g[r] * x[c];
    double* bg = wg + static_cast<size_t>(rows) * cols;
    for (int r = 0; r < rows; ++r) bg[r] += g[r];
    g = layer.weights.transpose() * g;
  }
  return g;
}

size_t Mlp::param_count() const {
  size_t n = 0;
  for (const MlpLayer& l : layers) n += static_cast<size_t>(l.weights.size()) + l.bias.size();
  return n;
}

void Mlp::read_params(const double* src) {
  size_t pos = 0;
  for (MlpLayer& l : layers) {
    const int rows = static_cast<int>(l.weights.rows());
    const int cols = static_cast<int>(l.weights.cols());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) l.weights(r, c) = src[pos++];
    for (int r = 0; r < rows; ++r) l.bias[r] = src[pos++];
  }
}

void Mlp::write_params(double* dst) const {
  size_t pos = 0;
  for (const MlpLayer& l : layers) {
    const int rows = static_cast<int>(l.weights.rows());
    const int cols = static_cast<int>(l.weights.cols());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) dst[pos++] = l.weights(r, c);
    for (int r = 0; r < rows; ++r) dst[pos++] = l.bias[r];
  }
}

size_t AppearanceModel::param_count() const {
  return trunk.param_count() + head_opacity.param_count() + head_static.param_count() +
         head_viewdep.param_count();
}

std::vector<double> AppearanceModel::params() const {
  std::vector<double> p(param_count());
  double* dst = p.data();
  trunk.write_params(dst);
  dst += trunk.param_count();
  head_opacity.write_params(dst);
  dst += head_opacity.param_count();
  head_static.write_params(dst);
  dst += head_static.param_count();
  head_viewdep.write_params(dst);
  return p;
}

void AppearanceModel::set_params(const std::vector<double>& p) {
  if (p.size() != param_count()) throw ConfigError("appearance parameter vector size mismatch");
  const double* src = p.data();
  trunk.read_params(src);
  src += trunk.param_count();
  head_opacity.read_params(src);
  src += head_opacity.param_count();
  head_static.read_params(src);
  src += head_static.param_count();
  head_viewdep.read_params(src);
}

namespace {

MlpLayer make_layer(int out, int in, Rng& rng, bool zero) {
  MlpLayer l;
  l.weights = MatX::Zero(out, in);
  l.bias = VecX::Zero(out);
  if (!zero) {
    double stddev = std::sqrt(2.0 / in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weights(r, c) = rng.normal(0.0, stddev);
  }
  return l;
}

}  // namespace

AppearanceModel init_appearance(const AppearanceConfig& config, uint64_t seed) {
  if (config.feature_dim < 0 || config.pe_bands < 1 || config.trunk_width < 1 ||
      config.latent_dim < 1 || config.head_width < 1)
    throw ConfigError("invalid appearance configuration");
  Rng rng(mix_seed(seed, 0xa99));
  AppearanceModel m;
  m.config = config;
  m.trunk.layers.push_back(make_layer(config.trunk_width, config.input_dim(), rng, false));
  m.trunk.layers.push_back(make_layer(config.trunk_width, config.trunk_width, rng, false));
  m.trunk.layers.push_back(make_layer(config.latent_dim, config.trunk_width, rng, false));
  m.head_opacity.layers.push_back(make_layer(config.head_width, config.latent_dim, rng, false));
  m.head_opacity.layers.push_back(make_layer(1, config.head_width, rng, false));
  m.head_static.layers.push_back(make_layer(config.head_width, config.latent_dim, rng, false));
  m.head_static.layers.push_back(make_layer(3, config.head_width, rng, false));
  m.head_viewdep.layers.push_back(make_layer(config.head_width, config.latent_dim + 3, rng, false));
  // zero output layer keeps the view-dependent residual dead at init
  m.head_viewdep.layers.push_back(make_layer(3, config.head_width, rng, true));
  return m;
}

namespace {

VecX assemble_input(const AppearanceConfig& cfg, const Gaussian4D& g, double t) {
  VecX x(cfg.input_dim());
  int pos = 0;
  for (int c = 0; c < 3; ++c) {
    double v = g.mean_xyz[c];
    for (int k = 0; k < cfg.pe_bands; ++k) {
      double f = std::ldexp(M_PI, k);  // 2^k * pi
      x[pos++] = std::sin(f * v);
      x[pos++] = std::cos(f * v);
    }
  }
  for (int k = 0; k < cfg.feature_dim; ++k) x[pos++] = k < g.feature.size() ? g.feature[k] : 0.0;
  x[pos++] = t;
  x[pos++] = std::sin(2.0 * M_PI * t);
  x[pos++] = std::cos(2.0 * M_PI * t);
  return x;
}

}  // namespace

AppearanceEval appearance_forward(const AppearanceModel& model, const Gaussian4D& g, double t,
                                  const Vec3& view_dir, AppearanceCache* cache) {
  const AppearanceConfig& cfg = model.config;
  if (g.feature.size() != cfg.feature_dim)
    throw ConfigError("appearance: feature dimension mismatch");
  VecX input = assemble_input(cfg, g, t);

  AppearanceCache local;
  AppearanceCache& c = cache ? *cache : local;
  c = AppearanceCache{};
  c.input = input;
  c.view_dir = view_dir;

  c.latent = model.trunk.forward(input, &c.trunk_inputs);
  VecX op_out = model.head_opacity.forward(c.latent, &c.op_inputs);
  VecX st_out = model.head_static.forward(c.latent, &c.st_inputs);
  VecX vd_in(cfg.latent_dim + 3);
  vd_in << c.latent, view_dir;
  VecX vd_out = model.head_viewdep.forward(vd_in, &c.vd_inputs);

  AppearanceEval eval;
  eval.opacity_logit = op_out[0];
  for (int ch = 0; ch < 3; ++ch) {
    c.static_rgb[ch] = sigmoid(st_out[ch]);
    c.color_unclamped[ch] = c.static_rgb[ch] + vd_out[ch];
    eval.color[ch] = std::clamp(c.color_unclamped[ch], 0.0, 1.0);
  }
  return eval;
}

AppearanceInputGrads appearance_backward(const AppearanceModel& model, const Gaussian4D& g,
                                         const AppearanceCache& cache, double d_opacity_logit,
                                         const Vec3& d_color, std::vector<double>& d_weights) {
  const AppearanceConfig& cfg = model.config;
  if (d_weights.size() != model.param_count())
    throw ConfigError("appearance: gradient buffer size mismatch");

  Vec3 d_unclamped = Vec3::Zero();
  for (int ch = 0; ch < 3; ++ch) {
    double v = cache.color_unclamped[ch];
    if (v > 0.0 && v < 1.0) d_unclamped[ch] = d_color[ch];
  }
  Vec3 d_static_out;
  for (int ch = 0; ch < 3; ++ch) {
    double s = cache.static_rgb[ch];
    d_static_out[ch] = d_unclamped[ch] * s * (1.0 - s);
  }

  size_t offset = 0;
  VecX d_latent = VecX::Zero(cfg.latent_dim);

  VecX d_op(1);
  d_op[0] = d_opacity_logit;
  offset = model.trunk.param_count();
  d_latent += model.head_opacity.backward(cache.op_inputs, d_op, d_weights, offset);
  d_latent += model.head_static.backward(cache.st_inputs, VecX(d_static_out), d_weights, offset);
  VecX d_vd_in =
      model.head_viewdep.backward(cache.vd_inputs, VecX(d_unclamped), d_weights, offset);
  d_latent += d_vd_in.head(cfg.latent_dim);

  offset = 0;
  VecX d_input = model.trunk.backward(cache.trunk_inputs, d_latent, d_weights, offset);

  AppearanceInputGrads grads;
  grads.d_view_dir = d_vd_in.tail<3>();
  grads.d_feature = VecX::Zero(cfg.feature_dim);
  int pos = 0;
  for (int c = 0; c < 3; ++c) {
    double v = g.mean_xyz[c];
    double acc = 0.0;
    for (int k = 0; k < cfg.pe_bands; ++k) {
      double f = std::ldexp(M_PI, k);
      acc += d_input[pos++] * f * std::cos(f * v);
      acc += d_input[pos++] * -f * std::sin(f * v);
    }
    grads.d_mean_xyz[c] = acc;
  }
  for (int k = 0; k < cfg.feature_dim; ++k) grads.d_feature[k] = d_input[pos++];
  // remaining inputs are functions of the frame timestamp, not of parameters
  return grads;
}

}  // namespace gs4c
