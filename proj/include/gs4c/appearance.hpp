#pragma once

#include <cstdint>
#include <vector>

#include "gs4c/types.hpp"

namespace gs4c {

struct MlpLayer {
  MatX weights;  // out x in
  VecX bias;     // out
};

// Dense ReLU MLP; the output layer is linear.
struct Mlp {
  std::vector<MlpLayer> layers;

  VecX forward(const VecX& x, std::vector<VecX>* inputs = nullptr) const;
  // Backprop for a cached forward; returns d_input, appends weight/bias grads
  // into `grads` starting at `offset` (flat layout: per layer W row-major, b).
  VecX backward(const std::vector<VecX>& inputs, const VecX& d_out,
                std::vector<double>& grads, size_t& offset) const;
  size_t param_count() const;
  void read_params(const double* src);
  void write_params(double* dst) const;
};

struct AppearanceConfig {
  int feature_dim = 8;
  int pe_bands = 4;     // frequency bands for the positional encoding
  int trunk_width = 64;
  int latent_dim = 32;
  int head_width = 32;

  int input_dim() const { return 6 * pe_bands + feature_dim + 3; }  // PE(xyz) + feature + (t, sin, cos)
};

// Spatial-feature trunk plus three time-conditioned heads producing opacity,
// static color, and a view-dependent color residual.
struct AppearanceModel {
  AppearanceConfig config;
  Mlp trunk;         // input -> latent
  Mlp head_opacity;  // latent -> 1
  Mlp head_static;   // latent -> 3
  Mlp head_viewdep;  // latent + view_dir -> 3

  size_t param_count() const;
  std::vector<double> params() const;
  void set_params(const std::vector<double>& p);
};

// Seeded He-style init; the view-dependent head's output layer starts at zero
// so the residual path is dead until trained.
AppearanceModel init_appearance(const AppearanceConfig& config, uint64_t seed);

struct AppearanceCache {
  VecX input;
  std::vector<VecX> trunk_inputs, op_inputs, st_inputs, vd_inputs;
  VecX latent;
  Vec3 static_rgb;      // sigmoid of the static head output
  Vec3 color_unclamped;
  Vec3 view_dir;
};

struct AppearanceEval {
  double opacity_logit = 0.0;
  Vec3 color = Vec3::Zero();  // clamp(sigmoid(static) + viewdep residual, 0, 1)
};

AppearanceEval appearance_forward(const AppearanceModel& model, const Gaussian4D& g, double t,
                                  const Vec3& view_dir, AppearanceCache* cache = nullptr);

struct AppearanceInputGrads {
  Vec3 d_mean_xyz = Vec3::Zero();
  VecX d_feature;
  Vec3 d_view_dir = Vec3::Zero();
};

// Backprop through a cached forward. Weight gradients accumulate into
// `d_weights` (sized model.param_count()).
AppearanceInputGrads appearance_backward(const AppearanceModel& model, const Gaussian4D& g,
                                         const AppearanceCache& cache, double d_opacity_logit,
                                         const Vec3& d_color, std::vector<double>& d_weights);

struct DistillConfig {
  int warmup_steps = 500;       // head regression against stored color/opacity
  double lr_mlp = 1e-3;
  double lr_feature = 2.5e-3;
  uint64_t seed = 0;
  double divergence_factor = 10.0;
};

struct DistillStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps_run = 0;
};

// Warm-starts the heads against the stored colors/opacities, then jointly
// optimizes MLP weights and per-Gaussian features against the rendering loss.
DistillStats distill(AppearanceModel& model, GaussianCloud& cloud,
                     const std::vector<CameraFrame>& frames, int steps,
                     const DistillConfig& config = {});

}  // namespace gs4c
