#include "gs4c/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace gs4c {

static_assert(std::endian::native == std::endian::little,
              "PLY and container serialization assume a little-endian host");

const char* stage_name(StageTag tag) {
  switch (tag) {
    case StageTag::Pretrained: return "pretrained";
    case StageTag::Sampled: return "sampled";
    case StageTag::Pruned: return "pruned";
    case StageTag::Merged: return "merged";
    case StageTag::Compressed: return "compressed";
  }
  return "unknown";
}

namespace {

constexpr double kQuatNormTol = 1e-6;

bool all_finite(const Gaussian4D& g) {
  if (!g.mean_xyz.allFinite() || !std::isfinite(g.mean_t)) return false;
  if (!g.scale_xyz.allFinite() || !std::isfinite(g.scale_t)) return false;
  if (!g.rot_l.allFinite() || !g.rot_r.allFinite()) return false;
  if (!std::isfinite(g.opacity) || !g.color_f.allFinite()) return false;
  if (g.feature.size() > 0 && !g.feature.allFinite()) return false;
  return true;
}

}  // namespace

ValidationReport validate(const GaussianCloud& cloud) {
  ValidationReport report;
  if (cloud.empty()) {
    report.violations.push_back({0, "cloud", "empty cloud is not renderable"});
    return report;
  }
  int feature_dim = cloud.gaussians.front().feature_dim();
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Gaussian4D& g = cloud.gaussians[i];
    if (!all_finite(g)) {
      report.violations.push_back({i, "any", "non-finite field"});
      continue;  // norms/NaN comparisons below would be meaningless
    }
    if (g.rot_l.norm() < kQuatNormTol)
      report.violations.push_back({i, "rot_l", "zero quaternion"});
    if (g.rot_r.norm() < kQuatNormTol)
      report.violations.push_back({i, "rot_r", "zero quaternion"});
    if (g.feature_dim() != feature_dim)
      report.violations.push_back({i, "feature", "inconsistent feature dimension"});
  }
  return report;
}

void require_valid(const GaussianCloud& cloud, const std::string& context) {
  ValidationReport report = validate(cloud);
  if (report.ok()) return;
  std::ostringstream os;
  os << context << ": invalid cloud (" << report.violations.size() << " violations; first: index "
     << report.violations.front().index << " " << report.violations.front().field << " "
     << report.violations.front().message << ")";
  throw FormatError(os.str());
}

namespace {

std::vector<std::string> property_names(int feature_dim) {
  std::vector<std::string> names = {"x",       "y",       "z",       "t",       "scale_x",
                                    "scale_y", "scale_z", "scale_t", "rot_l_0", "rot_l_1",
                                    "rot_l_2", "rot_l_3", "rot_r_0", "rot_r_1", "rot_r_2",
                                    "rot_r_3", "opacity", "f_dc_0",  "f_dc_1",  "f_dc_2"};
  for (int k = 0; k < feature_dim; ++k) names.push_back("feat_" + std::to_string(k));
  return names;
}

}  // namespace

GaussianCloud load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PLY file: " + path);

  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError(path + ": not a PLY file");
  if (!std::getline(in, line) || line != "format binary_little_endian 1.0")
    throw FormatError(path + ": unsupported PLY format (expected binary_little_endian 1.0)");

  size_t vertex_count = 0;
  bool in_vertex_element = false;
  std::vector<std::string> props;  // declared order
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") continue;
    if (tok == "element") {
      std::string name;
      size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        vertex_count = count;
        in_vertex_element = true;
      } else {
        if (count > 0) throw FormatError(path + ": unsupported element '" + name + "'");
        in_vertex_element = false;
      }
    } else if (tok == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      ls >> type >> name;
      if (type != "float")
        throw FormatError(path + ": property '" + name + "' has unsupported type '" + type + "'");
      props.push_back(name);
    }
  }
  if (!in) throw FormatError(path + ": truncated header");
  if (vertex_count == 0) throw FormatError(path + ": empty cloud (vertex count 0)");

  std::unordered_map<std::string, size_t> index_of;
  for (size_t i = 0; i < props.size(); ++i) index_of.emplace(props[i], i);

  int feature_dim = 0;
  while (index_of.count("feat_" + std::to_string(feature_dim))) ++feature_dim;

  for (const std::string& name : property_names(feature_dim)) {
    if (!index_of.count(name))
      throw FormatError(path + ": missing required property '" + name + "'");
  }

  const size_t stride = props.size();
  std::vector<float> row(stride);
  auto get = [&](const char* name) -> double { return row[index_of.at(name)]; };

  GaussianCloud cloud;
  cloud.stage_tag = StageTag::Pretrained;
  cloud.gaussians.resize(vertex_count);
  for (size_t i = 0; i < vertex_count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride * 4));
    if (!in) throw FormatError(path + ": truncated payload at vertex " + std::to_string(i));
    Gaussian4D& g = cloud.gaussians[i];
    g.mean_xyz = Vec3(get("x"), get("y"), get("z"));
    g.mean_t = get("t");
    g.scale_xyz = Vec3(get("scale_x"), get("scale_y"), get("scale_z"));
    g.scale_t = get("scale_t");
    g.rot_l = Vec4(get("rot_l_0"), get("rot_l_1"), get("rot_l_2"), get("rot_l_3"));
    g.rot_r = Vec4(get("rot_r_0"), get("rot_r_1"), get("rot_r_2"), get("rot_r_3"));
    g.opacity = get("opacity");
    g.color_f = Vec3(get("f_dc_0"), get("f_dc_1"), get("f_dc_2"));
    g.feature.resize(feature_dim);
    for (int k = 0; k < feature_dim; ++k)
      g.feature[k] = row[index_of.at("feat_" + std::to_string(k))];
  }
  return cloud;
}

void save_ply(const GaussianCloud& cloud, const std::string& path) {
  require_valid(cloud, "save_ply");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  int feature_dim = cloud.gaussians.front().feature_dim();
  out << "ply\n";
  out << "format binary_little_endian 1.0\n";
  out << "comment gs4c_version 1\n";
  out << "element vertex " << cloud.size() << "\n";
  for (const std::string& name : property_names(feature_dim))
    out << "property float " << name << "\n";
  out << "end_header\n";

  std::vector<float> row;
  row.reserve(20 + feature_dim);
  for (const Gaussian4D& g : cloud.gaussians) {
    row.clear();
    for (int c = 0; c < 3; ++c) row.push_back(static_cast<float>(g.mean_xyz[c]));
    row.push_back(static_cast<float>(g.mean_t));
    for (int c = 0; c < 3; ++c) row.push_back(static_cast<float>(g.scale_xyz[c]));
    row.push_back(static_cast<float>(g.scale_t));
    for (int c = 0; c < 4; ++c) row.push_back(static_cast<float>(g.rot_l[c]));
    for (int c = 0; c < 4; ++c) row.push_back(static_cast<float>(g.rot_r[c]));
    row.push_back(static_cast<float>(g.opacity));
    for (int c = 0; c < 3; ++c) row.push_back(static_cast<float>(g.color_f[c]));
    for (int k = 0; k < feature_dim; ++k) row.push_back(static_cast<float>(g.feature[k]));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace gs4c
