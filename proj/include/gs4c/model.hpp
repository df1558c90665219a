#pragma once

#include <string>
#include <vector>

#include "gs4c/types.hpp"

namespace gs4c {

struct Violation {
  size_t index = 0;      // Gaussian index, or 0 for cloud-level problems
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Checks every invariant and reports all failures; never mutates the cloud.
ValidationReport validate(const GaussianCloud& cloud);

// Throws FormatError with the report summary when the cloud is invalid.
void require_valid(const GaussianCloud& cloud, const std::string& context);

// Binary little-endian PLY profile. Vertex properties, in order:
//   x y z t, scale_x scale_y scale_z scale_t, rot_l_0..3, rot_r_0..3,
//   opacity, f_dc_0..2, feat_0..feat_{d_f-1}   (all float32)
// The header carries the comment line "gs4c_version 1".
GaussianCloud load_ply(const std::string& path);
void save_ply(const GaussianCloud& cloud, const std::string& path);

}  // namespace gs4c
