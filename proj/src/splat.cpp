#include "gs4c/splat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gs4c/common.hpp"
#include "gs4c/model.hpp"

namespace gs4c {

namespace {

constexpr double kMinAlpha = 1.0 / 255.0;
constexpr double kMaxAlpha = 0.999;
constexpr double kNearPlane = 0.01;
constexpr double kCovRegularizer = 0.3;  // pixel-space covariance floor
constexpr double kMinDet = 1e-12;
constexpr double kMinTemporalVar = 1e-12;

}  // namespace

Mat4 left_isoclinic(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat4 m;
  m << w, -x, -y, -z,
       x,  w, -z,  y,
       y,  z,  w, -x,
       z, -y,  x,  w;
  return m;
}

Mat4 right_isoclinic(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat4 m;
  m << w, -x, -y, -z,
       x,  w,  z, -y,
       y, -z,  w,  x,
       z,  y, -x,  w;
  return m;
}

Mat4 covariance4(const Gaussian4D& g) {
  Vec4 ql = g.rot_l / g.rot_l.norm();
  Vec4 qr = g.rot_r / g.rot_r.norm();
  Mat4 rot = left_isoclinic(ql) * right_isoclinic(qr);
  Vec4 sdiag(std::exp(g.scale_xyz[0]), std::exp(g.scale_xyz[1]), std::exp(g.scale_xyz[2]),
             std::exp(g.scale_t));
  Mat4 m = rot * sdiag.asDiagonal();
  return m * m.transpose();
}

Conditioned3D condition_at(const Gaussian4D& g, double t) {
  Mat4 sigma4 = covariance4(g);
  double stt = sigma4(3, 3);
  if (!(stt >= kMinTemporalVar))
    throw NumericalError("condition_at: degenerate temporal variance");
  Vec3 sxt = sigma4.block<3, 1>(0, 3);
  double dt = t - g.mean_t;
  Conditioned3D out;
  out.mean3 = g.mean_xyz + sxt * (dt / stt);
  out.cov3 = sigma4.block<3, 3>(0, 0) - (sxt * sxt.transpose()) / stt;
  out.temporal_weight = std::exp(-0.5 * dt * dt / stt);
  return out;
}

namespace {

// Everything the pixel loops need per Gaussian, cached once per frame.
struct Prepared {
  bool active = false;
  // conditioning
  Vec4 ql_hat, qr_hat;
  double ql_norm = 1.0, qr_norm = 1.0;
  Mat4 rot4;
  Vec4 sdiag;
  Mat4 m4;  // rot4 * diag(sdiag)
  Vec3 sxt;
  double stt = 1.0;
  Vec3 mean3;
  double dt = 0.0;
  double tweight = 1.0;
  // camera
  Vec3 p_cam;
  double invz = 0.0;
  Vec2 u;
  Mat2 cov2;
  Mat2 conic;
  // shading
  double opacity_logit = 0.0;
  double op = 0.0;    // sigmoid(opacity_logit)
  double base = 0.0;  // op * tweight
  Vec3 color;
  Vec3 color_raw;       // pre-clamp (stored path)
  Vec3 view_dir;
  double view_len = 1.0;
  AppearanceCache mlp;
  bool has_mlp_cache = false;
  // inclusive pixel bounds
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

struct FrameContext {
  std::vector<Prepared> prep;
  std::vector<size_t> order;  // active Gaussians, front-to-back
  Mat3 w2c;
};

FrameContext prepare_frame(const GaussianCloud& cloud, const CameraFrame& frame,
                           const AppearanceModel* appearance, bool cache_mlp,
                           RenderStats* stats) {
  if (frame.height() < 8 || frame.width() < 8)
    throw ConfigError("render: frame smaller than 8x8");
  if (frame.timestamp < 0.0 || frame.timestamp > 1.0)
    throw ConfigError("render: timestamp outside [0,1]");

  FrameContext ctx;
  ctx.w2c = frame.rot;
  ctx.prep.resize(cloud.size());
  const double t = frame.timestamp;
  const Vec3 cam_center = frame.camera_center();
  const int width = frame.width(), height = frame.height();

  for (size_t i = 0; i < cloud.size(); ++i) {
    const Gaussian4D& g = cloud.gaussians[i];
    Prepared& p = ctx.prep[i];

    p.ql_norm = g.rot_l.norm();
    p.qr_norm = g.rot_r.norm();
    if (p.ql_norm < 1e-12 || p.qr_norm < 1e-12) {
      if (stats) ++stats->skipped_degenerate;
      continue;
    }
    p.ql_hat = g.rot_l / p.ql_norm;
    p.qr_hat = g.rot_r / p.qr_norm;
    p.rot4 = left_isoclinic(p.ql_hat) * right_isoclinic(p.qr_hat);
    p.sdiag = Vec4(std::exp(g.scale_xyz[0]), std::exp(g.scale_xyz[1]), std::exp(g.scale_xyz[2]),
                   std::exp(g.scale_t));
    p.m4 = p.rot4 * p.sdiag.asDiagonal();
    Mat4 sigma4 = p.m4 * p.m4.transpose();
    p.stt = sigma4(3, 3);
    if (!(p.stt >= kMinTemporalVar)) {
      if (stats) ++stats->skipped_degenerate;
      continue;
    }
    p.sxt = sigma4.block<3, 1>(0, 3);
    p.dt = t - g.mean_t;
    p.mean3 = g.mean_xyz + p.sxt * (p.dt / p.stt);
    p.tweight = std::exp(-0.5 * p.dt * p.dt / p.stt);
    Mat3 cov3 = sigma4.block<3, 3>(0, 0) - (p.sxt * p.sxt.transpose()) / p.stt;

    p.p_cam = ctx.w2c * p.mean3 + frame.trans;
    if (p.p_cam.z() < kNearPlane) {
      if (stats) ++stats->culled_behind;
      continue;
    }

    // shading (before alpha prechecks: the opacity may come from the MLP)
    if (appearance) {
      Vec3 rel = p.mean3 - cam_center;
      p.view_len = std::max(rel.norm(), 1e-12);
      p.view_dir = rel / p.view_len;
      AppearanceEval eval =
          appearance_forward(*appearance, g, t, p.view_dir, cache_mlp ? &p.mlp : nullptr);
      p.has_mlp_cache = cache_mlp;
      p.opacity_logit = eval.opacity_logit;
      p.color = eval.color;
    } else {
      p.opacity_logit = g.opacity;
      p.color_raw = g.color_f;
      p.color = g.color_f.cwiseMax(0.0).cwiseMin(1.0);
    }
    p.op = sigmoid(p.opacity_logit);
    p.base = p.op * p.tweight;
    if (p.base * 255.0 <= 1.0) continue;  // no pixel can reach the alpha floor

    p.invz = 1.0 / p.p_cam.z();
    p.u = Vec2(frame.fx * p.p_cam.x() * p.invz + frame.cx,
               frame.fy * p.p_cam.y() * p.invz + frame.cy);

    Mat3 vcam = ctx.w2c * cov3 * ctx.w2c.transpose();
    Eigen::Matrix<double, 2, 3> jproj;
    jproj << frame.fx * p.invz, 0.0, -frame.fx * p.p_cam.x() * p.invz * p.invz,
             0.0, frame.fy * p.invz, -frame.fy * p.p_cam.y() * p.invz * p.invz;
    p.cov2 = jproj * vcam * jproj.transpose();
    p.cov2(0, 0) += kCovRegularizer;
    p.cov2(1, 1) += kCovRegularizer;
    p.cov2(1, 0) = p.cov2(0, 1);
    double det = p.cov2(0, 0) * p.cov2(1, 1) - p.cov2(0, 1) * p.cov2(1, 0);
    if (!(det > kMinDet) || !p.cov2.allFinite()) {
      if (stats) ++stats->skipped_degenerate;
      continue;
    }
    p.conic << p.cov2(1, 1) / det, -p.cov2(0, 1) / det, -p.cov2(1, 0) / det, p.cov2(0, 0) / det;

    // The ellipse where alpha exactly hits the floor; outside it nothing
    // would survive the per-pixel threshold anyway.
    double chi2 = 2.0 * std::log(p.base * 255.0);
    double rx = std::sqrt(chi2 * p.cov2(0, 0)) + 1e-9;
    double ry = std::sqrt(chi2 * p.cov2(1, 1)) + 1e-9;
    p.x0 = std::max(0, static_cast<int>(std::ceil(p.u.x() - rx - 0.5)));
    p.x1 = std::min(width - 1, static_cast<int>(std::floor(p.u.x() + rx - 0.5)));
    p.y0 = std::max(0, static_cast<int>(std::ceil(p.u.y() - ry - 0.5)));
    p.y1 = std::min(height - 1, static_cast<int>(std::floor(p.u.y() + ry - 0.5)));
    if (p.x0 > p.x1 || p.y0 > p.y1) {
      if (stats) ++stats->culled_offscreen;
      continue;
    }
    p.active = true;
    if (stats) ++stats->drawn;
  }

  ctx.order.reserve(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i)
    if (ctx.prep[i].active) ctx.order.push_back(i);
  std::stable_sort(ctx.order.begin(), ctx.order.end(), [&](size_t a, size_t b) {
    if (ctx.prep[a].p_cam.z() != ctx.prep[b].p_cam.z())
      return ctx.prep[a].p_cam.z() < ctx.prep[b].p_cam.z();
    return a < b;
  });
  return ctx;
}

inline double gauss_weight(const Prepared& p, double px, double py) {
  double dx = px - p.u.x();
  double dy = py - p.u.y();
  double e = 0.5 * (p.conic(0, 0) * dx * dx + 2.0 * p.conic(0, 1) * dx * dy +
                    p.conic(1, 1) * dy * dy);
  if (e < 0.0) return 0.0;  // conic should be PD; guard anyway
  return std::exp(-e);
}

void composite_row_range(const FrameContext& ctx, int width, int y_begin, int y_end,
                         Image& image) {
  std::vector<const Prepared*> row_active;
  for (int y = y_begin; y < y_end; ++y) {
    row_active.clear();
    for (size_t idx : ctx.order) {
      const Prepared& p = ctx.prep[idx];
      if (y >= p.y0 && y <= p.y1) row_active.push_back(&p);
    }
    const double py = y + 0.5;
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5;
      double transmittance = 1.0;
      double r = 0.0, g = 0.0, b = 0.0;
      for (const Prepared* p : row_active) {
        if (x < p->x0 || x > p->x1) continue;
        double alpha = p->base * gauss_weight(*p, px, py);
        if (alpha < kMinAlpha) continue;
        if (alpha > kMaxAlpha) alpha = kMaxAlpha;
        double wgt = transmittance * alpha;
        r += wgt * p->color[0];
        g += wgt * p->color[1];
        b += wgt * p->color[2];
        transmittance *= 1.0 - alpha;
      }
      image.at(y, x, 0) = r;
      image.at(y, x, 1) = g;
      image.at(y, x, 2) = b;
    }
  }
}

}  // namespace

Image render(const GaussianCloud& cloud, const CameraFrame& frame,
             const AppearanceModel* appearance, RenderStats* stats) {
  require_valid(cloud, "render");
  FrameContext ctx = prepare_frame(cloud, frame, appearance, false, stats);
  Image image(frame.height(), frame.width());
  size_t n_blocks = static_cast<size_t>(frame.height());
  parallel_blocks(static_cast<size_t>(frame.height()), n_blocks,
                  [&](size_t, size_t begin, size_t end) {
                    composite_row_range(ctx, frame.width(), static_cast<int>(begin),
                                        static_cast<int>(end), image);
                  });
  return image;
}

double image_loss(const Image& rendered, const Image& target, LossKind kind) {
  if (rendered.height != target.height || rendered.width != target.width)
    throw ConfigError("image_loss: size mismatch");
  double total = 0.0;
  for (size_t i = 0; i < rendered.data.size(); ++i) {
    double r = rendered.data[i] - target.data[i];
    total += kind == LossKind::L1 ? std::abs(r) : r * r;
  }
  return total / static_cast<double>(rendered.data.size());
}

namespace {

// Per-Gaussian accumulators collected from the pixel loop.
struct PixelAccum {
  Vec2 g_u = Vec2::Zero();
  Mat2 g_conic = Mat2::Zero();
  double g_base = 0.0;
  Vec3 g_color = Vec3::Zero();
  double loss = 0.0;  // only slot 0 of each block is used for the loss
};

void backward_row_range(const FrameContext& ctx, const CameraFrame& frame, LossKind loss_kind,
                        int y_begin, int y_end, std::vector<PixelAccum>& accum) {
  const int width = frame.width();
  const double inv_count = 1.0 / (static_cast<double>(frame.image.data.size()));
  std::vector<const Prepared*> row_active;
  std::vector<size_t> row_index;

  for (int y = y_begin; y < y_end; ++y) {
    row_active.clear();
    row_index.clear();
    for (size_t idx : ctx.order) {
      const Prepared& p = ctx.prep[idx];
      if (y >= p.y0 && y <= p.y1) {
        row_active.push_back(&p);
        row_index.push_back(idx);
      }
    }
    const double py = y + 0.5;
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5;

      // forward pass for this pixel
      double transmittance = 1.0;
      Vec3 color_sum = Vec3::Zero();
      for (const Prepared* p : row_active) {
        if (x < p->x0 || x > p->x1) continue;
        double alpha = p->base * gauss_weight(*p, px, py);
        if (alpha < kMinAlpha) continue;
        if (alpha > kMaxAlpha) alpha = kMaxAlpha;
        color_sum += transmittance * alpha * p->color;
        transmittance *= 1.0 - alpha;
      }

      Vec3 h;  // dL/dpixel
      for (int c = 0; c < 3; ++c) {
        double residual = color_sum[c] - frame.image.at(y, x, c);
        if (loss_kind == LossKind::L1) {
          accum[0].loss += std::abs(residual) * inv_count;
          h[c] = residual > 0.0 ? inv_count : (residual < 0.0 ? -inv_count : 0.0);
        } else {
          accum[0].loss += residual * residual * inv_count;
          h[c] = 2.0 * residual * inv_count;
        }
      }
      if (h.isZero(0.0)) continue;

      // second pass: replay compositing, distributing dL/dalpha and dL/dcolor
      double trans = 1.0;
      Vec3 prefix = Vec3::Zero();  // contributions up to and including current
      for (size_t k = 0; k < row_active.size(); ++k) {
        const Prepared* p = row_active[k];
        if (x < p->x0 || x > p->x1) continue;
        double dx = px - p->u.x();
        double dy = py - p->u.y();
        double e = 0.5 * (p->conic(0, 0) * dx * dx + 2.0 * p->conic(0, 1) * dx * dy +
                          p->conic(1, 1) * dy * dy);
        double gval = e < 0.0 ? 0.0 : std::exp(-e);
        double alpha_raw = p->base * gval;
        if (alpha_raw < kMinAlpha) continue;
        bool clamped = alpha_raw > kMaxAlpha;
        double alpha = clamped ? kMaxAlpha : alpha_raw;

        PixelAccum& acc = accum[row_index[k]];
        double wgt = trans * alpha;
        prefix += wgt * p->color;
        acc.g_color += wgt * h;

        if (!clamped) {
          // dL/dalpha via suffix contributions: S = color_sum - prefix
          double d_alpha = 0.0;
          for (int c = 0; c < 3; ++c) {
            double suffix = color_sum[c] - prefix[c];
            d_alpha += h[c] * (p->color[c] * trans - suffix / (1.0 - alpha));
          }
          double d_gval = d_alpha * p->base;
          acc.g_base += d_alpha * gval;
          // dg/du = g * (conic * d)
          double cx = p->conic(0, 0) * dx + p->conic(0, 1) * dy;
          double cy = p->conic(0, 1) * dx + p->conic(1, 1) * dy;
          double s = d_gval * gval;
          acc.g_u[0] += s * cx;
          acc.g_u[1] += s * cy;
          // dg/dconic = -0.5 * g * d d^T
          double q = -0.5 * s;
          acc.g_conic(0, 0) += q * dx * dx;
          acc.g_conic(0, 1) += q * dx * dy;
          acc.g_conic(1, 0) += q * dy * dx;
          acc.g_conic(1, 1) += q * dy * dy;
        }
        trans *= 1.0 - alpha;
      }
    }
  }
}

const std::array<Mat4, 4>& left_basis() {
  static const std::array<Mat4, 4> basis = [] {
    std::array<Mat4, 4> b;
    for (int k = 0; k < 4; ++k) b[k] = left_isoclinic(Vec4::Unit(k));
    return b;
  }();
  return basis;
}

const std::array<Mat4, 4>& right_basis() {
  static const std::array<Mat4, 4> basis = [] {
    std::array<Mat4, 4> b;
    for (int k = 0; k < 4; ++k) b[k] = right_isoclinic(Vec4::Unit(k));
    return b;
  }();
  return basis;
}

}  // namespace

std::pair<double, RenderGradients> render_backward(const GaussianCloud& cloud,
                                                   const CameraFrame& frame, LossKind loss_kind,
                                                   const AppearanceModel* appearance,
                                                   RenderStats* stats) {
  require_valid(cloud, "render_backward");
  if (frame.image.data.empty()) throw ConfigError("render_backward: frame has no target image");
  FrameContext ctx = prepare_frame(cloud, frame, appearance, appearance != nullptr, stats);

  const size_t n = cloud.size();
  const size_t n_blocks = static_cast<size_t>(frame.height());
  std::vector<std::vector<PixelAccum>> block_accum(n_blocks);

  parallel_blocks(static_cast<size_t>(frame.height()), n_blocks,
                  [&](size_t block, size_t begin, size_t end) {
                    block_accum[block].assign(n == 0 ? 1 : n, PixelAccum{});
                    backward_row_range(ctx, frame, loss_kind, static_cast<int>(begin),
                                       static_cast<int>(end), block_accum[block]);
                  });

  // deterministic reduction in block order
  std::vector<PixelAccum> accum(n == 0 ? 1 : n, PixelAccum{});
  double loss = 0.0;
  for (size_t b = 0; b < n_blocks; ++b) {
    if (block_accum[b].empty()) continue;
    loss += block_accum[b][0].loss;
    for (size_t i = 0; i < n; ++i) {
      PixelAccum& dst = accum[i];
      const PixelAccum& src = block_accum[b][i];
      dst.g_u += src.g_u;
      dst.g_conic += src.g_conic;
      dst.g_base += src.g_base;
      dst.g_color += src.g_color;
    }
  }

  RenderGradients grads;
  grads.d_loss_d_u.assign(n, Vec2::Zero());
  grads.d_loss_d_t.assign(n, 0.0);
  grads.d_loss_d_params.resize(n);
  if (appearance) grads.d_loss_d_mlp.assign(appearance->param_count(), 0.0);

  for (size_t i = 0; i < n; ++i) {
    const Gaussian4D& g = cloud.gaussians[i];
    ParamGradients& pg = grads.d_loss_d_params[i];
    pg.feature = VecX::Zero(g.feature.size());
    const Prepared& p = ctx.prep[i];
    if (!p.active) continue;
    const PixelAccum& acc = accum[i];

    grads.d_loss_d_u[i] = acc.g_u;

    // alpha = op * tweight * g
    double d_op = acc.g_base * p.tweight;
    double d_tweight = acc.g_base * p.op;
    double d_logit = d_op * p.op * (1.0 - p.op);

    // conic = cov2^-1
    Mat2 d_cov2 = -p.conic * acc.g_conic * p.conic;

    // cov2 = J vcam J^T + reg, vcam = W cov3 W^T
    const double fx = frame.fx, fy = frame.fy;
    const double invz = p.invz;
    Eigen::Matrix<double, 2, 3> jproj;
    jproj << fx * invz, 0.0, -fx * p.p_cam.x() * invz * invz,
             0.0, fy * invz, -fy * p.p_cam.y() * invz * invz;
    // recompute vcam from cov3 pieces (cheap, avoids caching another matrix)
    Mat4 sigma4 = p.m4 * p.m4.transpose();
    Mat3 cov3w = sigma4.block<3, 3>(0, 0) - (p.sxt * p.sxt.transpose()) / p.stt;
    Mat3 vcam = ctx.w2c * cov3w * ctx.w2c.transpose();

    Eigen::Matrix<double, 2, 3> d_j = 2.0 * d_cov2 * jproj * vcam;
    Mat3 d_vcam = jproj.transpose() * d_cov2 * jproj;
    Mat3 d_cov3 = ctx.w2c.transpose() * d_vcam * ctx.w2c;

    // projection: u and J both depend on p_cam
    Vec3 d_pcam = Vec3::Zero();
    d_pcam.x() += acc.g_u[0] * fx * invz;
    d_pcam.y() += acc.g_u[1] * fy * invz;
    d_pcam.z() += acc.g_u[0] * (-fx * p.p_cam.x() * invz * invz) +
                  acc.g_u[1] * (-fy * p.p_cam.y() * invz * invz);
    d_pcam.x() += d_j(0, 2) * (-fx * invz * invz);
    d_pcam.y() += d_j(1, 2) * (-fy * invz * invz);
    d_pcam.z() += d_j(0, 0) * (-fx * invz * invz) + d_j(1, 1) * (-fy * invz * invz) +
                  d_j(0, 2) * (2.0 * fx * p.p_cam.x() * invz * invz * invz) +
                  d_j(1, 2) * (2.0 * fy * p.p_cam.y() * invz * invz * invz);

    Vec3 d_mean3 = ctx.w2c.transpose() * d_pcam;

    // appearance model: color/opacity heads plus the view-direction path
    if (appearance && p.has_mlp_cache) {
      Vec3 d_color = acc.g_color;  // clamp handled inside appearance_backward
      AppearanceInputGrads in_grads =
          appearance_backward(*appearance, g, p.mlp, d_logit, d_color, grads.d_loss_d_mlp);
      pg.feature += in_grads.d_feature;
      pg.mean_xyz += in_grads.d_mean_xyz;
      // view_dir = rel / |rel|, rel = mean3 - cam_center
      Vec3 dv = in_grads.d_view_dir;
      d_mean3 += (dv - p.view_dir * p.view_dir.dot(dv)) / p.view_len;
      d_logit = 0.0;  // consumed by the MLP path
    } else {
      for (int c = 0; c < 3; ++c)
        if (p.color_raw[c] > 0.0 && p.color_raw[c] < 1.0) pg.color_f[c] = acc.g_color[c];
      pg.opacity = d_logit;
    }

    // mean3 = mean_xyz + sxt * (dt / stt)
    pg.mean_xyz += d_mean3;
    Vec3 d_sxt = d_mean3 * (p.dt / p.stt);
    double d_stt = -d_mean3.dot(p.sxt) * p.dt / (p.stt * p.stt);
    double d_dt = d_mean3.dot(p.sxt) / p.stt;

    // tweight = exp(-0.5 dt^2 / stt)
    d_dt += d_tweight * p.tweight * (-p.dt / p.stt);
    d_stt += d_tweight * p.tweight * (0.5 * p.dt * p.dt / (p.stt * p.stt));

    // cov3 = sigma_xx - sxt sxt^T / stt
    d_sxt += -2.0 * d_cov3 * p.sxt / p.stt;
    d_stt += p.sxt.dot(d_cov3 * p.sxt) / (p.stt * p.stt);

    // dt = t - mean_t
    double d_mean_t = -d_dt;

    Mat4 d_sigma4 = Mat4::Zero();
    d_sigma4.block<3, 3>(0, 0) = d_cov3;
    d_sigma4.block<3, 1>(0, 3) = d_sxt;
    d_sigma4(3, 3) = d_stt;

    // sigma4 = m4 m4^T, m4 = rot4 * diag(sdiag)
    Mat4 d_m4 = (d_sigma4 + d_sigma4.transpose()) * p.m4;
    Mat4 d_rot4 = d_m4 * p.sdiag.asDiagonal();
    Mat4 rtgm = p.rot4.transpose() * d_m4;
    for (int k = 0; k < 3; ++k) pg.scale_xyz[k] = rtgm(k, k) * p.sdiag[k];
    pg.scale_t = rtgm(3, 3) * p.sdiag[3];

    // rot4 = L(ql_hat) R(qr_hat); both factors are linear in their quaternion
    Mat4 right_m = right_isoclinic(p.qr_hat);
    Mat4 left_m = left_isoclinic(p.ql_hat);
    Mat4 gr_rt = d_rot4 * right_m.transpose();
    Mat4 lt_gr = left_m.transpose() * d_rot4;
    Vec4 d_ql_hat, d_qr_hat;
    for (int k = 0; k < 4; ++k) {
      d_ql_hat[k] = gr_rt.cwiseProduct(left_basis()[k]).sum();
      d_qr_hat[k] = lt_gr.cwiseProduct(right_basis()[k]).sum();
    }
    pg.rot_l = (d_ql_hat - p.ql_hat * p.ql_hat.dot(d_ql_hat)) / p.ql_norm;
    pg.rot_r = (d_qr_hat - p.qr_hat * p.qr_hat.dot(d_qr_hat)) / p.qr_norm;

    pg.mean_t = d_mean_t;
    grads.d_loss_d_t[i] = d_mean_t;
  }

  return {loss, std::move(grads)};
}

}  // namespace gs4c
