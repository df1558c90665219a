#pragma once

#include <optional>
#include <vector>

#include "gs4c/appearance.hpp"
#include "gs4c/types.hpp"

namespace gs4c {

// 3D Gaussian implied by a 4D Gaussian at a fixed timestamp.
struct Conditioned3D {
  Vec3 mean3 = Vec3::Zero();
  Mat3 cov3 = Mat3::Zero();
  double temporal_weight = 1.0;  // exp(-0.5 (t - mean_t)^2 / cov_tt)
};

// Full 4x4 covariance R S S^T R^T with R = L(rot_l) * R(rot_r) and
// S = diag(exp(scale_xyz), exp(scale_t)). Time is the last axis.
Mat4 covariance4(const Gaussian4D& g);

// Left/right isoclinic 4x4 matrices of a quaternion (w,x,y,z).
Mat4 left_isoclinic(const Vec4& q);
Mat4 right_isoclinic(const Vec4& q);

// Schur-complement conditioning at timestamp t. Throws NumericalError if the
// temporal variance falls below 1e-12.
Conditioned3D condition_at(const Gaussian4D& g, double t);

enum class LossKind { L1, L2 };

struct RenderStats {
  size_t culled_behind = 0;       // conditional mean behind the near plane
  size_t culled_offscreen = 0;    // bounding box misses the image
  size_t skipped_degenerate = 0;  // non-invertible 2D covariance
  size_t drawn = 0;
};

struct ParamGradients {
  Vec3 mean_xyz = Vec3::Zero();
  double mean_t = 0.0;
  Vec3 scale_xyz = Vec3::Zero();
  double scale_t = 0.0;
  Vec4 rot_l = Vec4::Zero();
  Vec4 rot_r = Vec4::Zero();
  double opacity = 0.0;
  Vec3 color_f = Vec3::Zero();
  VecX feature;  // sized to d_f when features exist, else empty
};

struct RenderGradients {
  std::vector<Vec2> d_loss_d_u;       // view-space position gradient per Gaussian
  std::vector<double> d_loss_d_t;     // gradient w.r.t. the temporal mean
  std::vector<ParamGradients> d_loss_d_params;
  std::vector<double> d_loss_d_mlp;   // appearance weights, empty without a model
};

// Renders the cloud into an H x W x 3 image in [0,1]. Gaussians are
// composited front-to-back by conditional-mean camera depth (ties broken by
// index); alpha = sigmoid(opacity) * temporal_weight * exp(-0.5 d^T S2^-1 d)
// clamped to [0, 0.999]; contributions below 1/255 are dropped. Color and
// opacity come from the appearance model when one is given.
Image render(const GaussianCloud& cloud, const CameraFrame& frame,
             const AppearanceModel* appearance = nullptr, RenderStats* stats = nullptr);

// Loss of the rendered image against frame.image plus exact gradients for the
// implemented forward pass. L1 uses the 0 subgradient at zero residual.
std::pair<double, RenderGradients> render_backward(const GaussianCloud& cloud,
                                                   const CameraFrame& frame,
                                                   LossKind loss_kind = LossKind::L1,
                                                   const AppearanceModel* appearance = nullptr,
                                                   RenderStats* stats = nullptr);

double image_loss(const Image& rendered, const Image& target, LossKind kind);

}  // namespace gs4c
