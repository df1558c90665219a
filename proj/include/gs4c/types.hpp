#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gs4c {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Error hierarchy. The CLI maps these onto exit codes, everything else just
// throws and lets the caller decide.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct ChecksumError : Error {
  using Error::Error;
};
struct StagingError : Error {
  using Error::Error;
};

// One 4D Gaussian primitive. Scales are stored as logarithms and opacity as a
// pre-sigmoid logit; activations are applied at evaluation time only.
// Quaternions are stored unnormalized and normalized where they are consumed.
struct Gaussian4D {
  Vec3 mean_xyz = Vec3::Zero();
  double mean_t = 0.0;            // normalized time in [0,1]
  Vec3 scale_xyz = Vec3::Zero();  // log-scale
  double scale_t = 0.0;           // log-scale
  Vec4 rot_l = Vec4(1, 0, 0, 0);  // left isoclinic quaternion (w,x,y,z)
  Vec4 rot_r = Vec4(1, 0, 0, 0);  // right isoclinic quaternion (w,x,y,z)
  double opacity = 0.0;           // logit
  Vec3 color_f = Vec3::Zero();    // zero-th order SH coefficient, in [0,1]
  VecX feature;                   // per-Gaussian appearance feature, d_f wide

  int feature_dim() const { return static_cast<int>(feature.size()); }
};

enum class StageTag : uint8_t {
  Pretrained = 0,
  Sampled = 1,
  Pruned = 2,
  Merged = 3,
  Compressed = 4,
};

const char* stage_name(StageTag tag);

// Ordered, immutable-by-convention collection of Gaussians. Reduction ops
// return a fresh cloud plus an index map into their parent.
struct GaussianCloud {
  std::vector<Gaussian4D> gaussians;
  StageTag stage_tag = StageTag::Pretrained;

  size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

using IndexMap = std::vector<size_t>;  // new index -> parent index

// Interleaved RGB image with values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // height*width*3, row-major, interleaved

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// Pinhole camera with a world-to-camera rigid transform and a ground-truth
// target image for that (view, timestamp) pair.
struct CameraFrame {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  Mat3 rot = Mat3::Identity();  // world-to-camera rotation
  Vec3 trans = Vec3::Zero();    // world-to-camera translation
  double timestamp = 0.0;       // in [0,1]
  Image image;                  // ground-truth target

  int width() const { return image.width; }
  int height() const { return image.height; }
  Vec3 camera_center() const { return -rot.transpose() * trans; }
};

}  // namespace gs4c
