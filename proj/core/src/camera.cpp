#include "panoscene/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "panoscene/errors.hpp"
#include "panoscene/json_writer.hpp"

namespace panoscene {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kOrthonormalTol = 1e-9;
constexpr int kMaxChainLength = 64;

void check_rotation(const Eigen::Matrix3d& r) {
  const Eigen::Matrix3d gram = r.transpose() * r;
  for (int i = 0; i < 3; i++) {
    for (int j = 0; j < 3; j++) {
      const double expected = i == j ? 1.0 : 0.0;
      if (std::abs(gram(i, j) - expected) > kOrthonormalTol) {
        throw ParameterError("rotation matrix is not orthonormal");
      }
    }
  }
  if (std::abs(r.determinant() - 1.0) > kOrthonormalTol) {
    throw ParameterError("rotation matrix must have determinant +1");
  }
}

}  // namespace

CameraIntrinsics::CameraIntrinsics(double fx, double fy, double cx, double cy, int width,
                                   int height)
    : fx(fx), fy(fy), cx(cx), cy(cy), width(width), height(height) {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw ParameterError("focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw ParameterError("image dimensions must be positive");
  }
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw ParameterError("principal point must lie inside the image");
  }
}

CameraIntrinsics CameraIntrinsics::from_fov(double fov_deg, int width, int height) {
  if (!(fov_deg > 0.0) || !(fov_deg < 180.0)) {
    throw ParameterError("field of view must be in (0, 180) degrees");
  }
  const double f = width / (2.0 * std::tan(fov_deg * kPi / 360.0));
  return CameraIntrinsics(f, f, width / 2.0, height / 2.0, width, height);
}

double CameraIntrinsics::fov_x_rad() const {
  return 2.0 * std::atan2(width / 2.0, fx);
}

double CameraIntrinsics::fov_y_rad() const {
  return 2.0 * std::atan2(height / 2.0, fy);
}

Pose::Pose() : rotation_(Eigen::Matrix3d::Identity()), position_(Eigen::Vector3d::Zero()) {}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& position)
    : rotation_(rotation), position_(position) {
  check_rotation(rotation_);
  if (!position_.allFinite()) {
    throw ParameterError("pose position must be finite");
  }
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) = -u.col(2);
  }
  return u * v.transpose();
}

Pose pose_compose(const Pose& a, const Pose& b) {
  Eigen::Matrix3d r = a.rotation_ * b.rotation_;
  const Eigen::Vector3d c = b.position_ + b.rotation_.transpose() * a.position_;
  int chain = a.chain_ + b.chain_ + 1;
  if (chain > kMaxChainLength) {
    r = project_to_rotation(r);
    chain = 0;
  }
  Pose out(r, c);
  out.chain_ = chain;
  return out;
}

Pose pose_inverse(const Pose& p) {
  // The inverse transform maps camera coordinates back to world ones:
  // x -> R^T x + C, which as a Pose is (R^T, -R C).
  return Pose(p.rotation().transpose(), -(p.rotation() * p.position()));
}

Eigen::Vector3d direction_from_azimuth_elevation(double azimuth_rad, double elevation_rad) {
  const double polar = kPi / 2.0 - elevation_rad;
  return {std::sin(polar) * std::sin(azimuth_rad), -std::cos(polar),
          std::sin(polar) * std::cos(azimuth_rad)};
}

Pose look_at_pose(const Eigen::Vector3d& position, double azimuth_rad, double elevation_rad) {
  const Eigen::Vector3d forward = direction_from_azimuth_elevation(azimuth_rad, elevation_rad);
  const Eigen::Vector3d world_up(0.0, -1.0, 0.0);
  Eigen::Vector3d right = forward.cross(world_up);
  if (right.norm() < 1e-12) {
    // Looking straight at a pole; keep +z as the reference horizontal.
    right = forward.cross(Eigen::Vector3d(0.0, 0.0, 1.0));
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  return Pose(project_to_rotation(r), position);
}

const char* to_string(OffsetDirection d) {
  switch (d) {
    case OffsetDirection::kUp: return "up";
    case OffsetDirection::kDown: return "down";
    case OffsetDirection::kLeft: return "left";
    case OffsetDirection::kRight: return "right";
  }
  return "up";
}

OffsetDirection offset_direction_from_string(const std::string& s) {
  if (s == "up") return OffsetDirection::kUp;
  if (s == "down") return OffsetDirection::kDown;
  if (s == "left") return OffsetDirection::kLeft;
  if (s == "right") return OffsetDirection::kRight;
  throw ParameterError("unknown offset direction: " + s);
}

std::vector<BaseDirection> base_camera_directions(int count, double fov_deg) {
  if (count < 1) {
    throw ParameterError("camera count must be >= 1");
  }
  if (!(fov_deg > 0.0) || !(fov_deg < 180.0)) {
    throw ParameterError("field of view must be in (0, 180) degrees");
  }

  const double ring_step = std::max(fov_deg - 15.0, fov_deg / 2.0);
  const int max_rings = int(std::ceil(180.0 / ring_step));
  const int rings = std::clamp(count / 4, 1, max_rings);

  std::vector<double> elevation(rings);
  std::vector<double> weight(rings);
  double weight_sum = 0.0;
  for (int i = 0; i < rings; i++) {
    elevation[i] = (i - (rings - 1) / 2.0) * ring_step;
    weight[i] = std::cos(elevation[i] * kPi / 180.0);
    weight_sum += weight[i];
  }

  // One camera per ring, the rest by largest remainder on cos(elevation).
  std::vector<int> per_ring(rings, 1);
  const int spare = count - rings;
  std::vector<double> quota(rings);
  std::vector<int> extra(rings, 0);
  int assigned = 0;
  for (int i = 0; i < rings; i++) {
    quota[i] = spare * weight[i] / weight_sum;
    extra[i] = int(std::floor(quota[i]));
    assigned += extra[i];
  }
  std::vector<int> order(rings);
  for (int i = 0; i < rings; i++) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = quota[a] - std::floor(quota[a]);
    const double fb = quota[b] - std::floor(quota[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  });
  for (int k = 0; k < spare - assigned; k++) {
    extra[order[k % rings]]++;
  }
  for (int i = 0; i < rings; i++) {
    per_ring[i] += extra[i];
  }

  std::vector<BaseDirection> out;
  out.reserve(count);
  for (int i = 0; i < rings; i++) {
    const double az_step = 360.0 / per_ring[i];
    const double stagger = (i % 2) * az_step / 2.0;
    for (int j = 0; j < per_ring[i]; j++) {
      out.push_back({stagger + j * az_step, elevation[i]});
    }
  }
  return out;
}

CameraSet build_base_cameras(int count, double fov_deg, int resolution,
                             const Eigen::Vector3d& center) {
  if (resolution < 1) {
    throw ParameterError("resolution must be >= 1");
  }
  const CameraIntrinsics intr = CameraIntrinsics::from_fov(fov_deg, resolution, resolution);
  const std::vector<BaseDirection> dirs = base_camera_directions(count, fov_deg);

  CameraSet set;
  set.base.reserve(dirs.size());
  for (const BaseDirection& d : dirs) {
    set.base.push_back(
        {look_at_pose(center, d.azimuth_deg * kPi / 180.0, d.elevation_deg * kPi / 180.0), intr});
  }
  return set;
}

CameraSet build_supplementary_cameras(const CameraSet& base, double offset) {
  if (!(offset > 0.0)) {
    throw ParameterError("supplementary camera offset must be positive");
  }
  CameraSet out = base;
  out.supplementary.clear();
  out.supplementary.reserve(base.base.size() * 4);
  for (size_t i = 0; i < base.base.size(); i++) {
    const Camera& cam = base.base[i];
    const struct {
      OffsetDirection dir;
      Eigen::Vector3d axis;
    } offsets[4] = {
        {OffsetDirection::kUp, cam.pose.up_axis()},
        {OffsetDirection::kDown, cam.pose.down_axis()},
        {OffsetDirection::kLeft, -cam.pose.right_axis()},
        {OffsetDirection::kRight, cam.pose.right_axis()},
    };
    for (const auto& o : offsets) {
      out.supplementary.push_back({int(i), o.dir,
                                   Pose(cam.pose.rotation(), cam.pose.position() + offset * o.axis),
                                   cam.intrinsics});
    }
  }
  return out;
}

namespace {

void write_camera_fields(JsonWriter& w, const Pose& pose, const CameraIntrinsics& intr) {
  w.key("position").begin_array();
  for (int i = 0; i < 3; i++) {
    w.value(pose.position()(i));
  }
  w.end_array();
  w.key("rotation").begin_array();
  for (int i = 0; i < 3; i++) {
    for (int j = 0; j < 3; j++) {
      w.value(pose.rotation()(i, j));
    }
  }
  w.end_array();
  w.key("fx").value(intr.fx);
  w.key("fy").value(intr.fy);
  w.key("cx").value(intr.cx);
  w.key("cy").value(intr.cy);
  w.key("width").value(intr.width);
  w.key("height").value(intr.height);
}

Pose pose_from_json_fields(const nlohmann::json& j) {
  const auto& pos = j.at("position");
  const auto& rot = j.at("rotation");
  if (pos.size() != 3 || rot.size() != 9) {
    throw ParameterError("camera JSON: position must have 3 and rotation 9 entries");
  }
  Eigen::Vector3d c;
  for (int i = 0; i < 3; i++) {
    c(i) = pos[i].get<double>();
  }
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; i++) {
    for (int k = 0; k < 3; k++) {
      r(i, k) = rot[3 * i + k].get<double>();
    }
  }
  return Pose(r, c);
}

CameraIntrinsics intrinsics_from_json_fields(const nlohmann::json& j) {
  return CameraIntrinsics(j.at("fx").get<double>(), j.at("fy").get<double>(),
                          j.at("cx").get<double>(), j.at("cy").get<double>(),
                          j.at("width").get<int>(), j.at("height").get<int>());
}

}  // namespace

std::string camera_set_to_json(const CameraSet& set) {
  JsonWriter w;
  w.begin_object();
  w.key("base").begin_array();
  for (const Camera& cam : set.base) {
    w.begin_object();
    write_camera_fields(w, cam.pose, cam.intrinsics);
    w.end_object();
  }
  w.end_array();
  w.key("supplementary").begin_array();
  for (const SupplementaryCamera& cam : set.supplementary) {
    w.begin_object();
    w.key("base_index").value(cam.base_index);
    w.key("direction").value(to_string(cam.direction));
    write_camera_fields(w, cam.pose, cam.intrinsics);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

CameraSet camera_set_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("camera JSON parse error: ") + e.what());
  }
  CameraSet set;
  try {
    for (const auto& c : j.at("base")) {
      set.base.push_back({pose_from_json_fields(c), intrinsics_from_json_fields(c)});
    }
    for (const auto& c : j.at("supplementary")) {
      set.supplementary.push_back({c.at("base_index").get<int>(),
                                   offset_direction_from_string(c.at("direction").get<std::string>()),
                                   pose_from_json_fields(c), intrinsics_from_json_fields(c)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("camera JSON structure error: ") + e.what());
  }
  return set;
}

}  // namespace panoscene
