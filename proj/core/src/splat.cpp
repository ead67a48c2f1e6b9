#include "panoscene/splat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "panoscene/errors.hpp"
#include "panoscene/json_writer.hpp"
#include "panoscene/parallel.hpp"
#include "panoscene/png_io.hpp"

namespace panoscene {

Gaussian3D::Gaussian3D(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma, double alpha,
                       const Eigen::Vector3f& color)
    : mu_(mu), sigma_(sigma), alpha_(alpha), color_(color) {
  if (!mu.allFinite() || !sigma.allFinite()) {
    throw ParameterError("Gaussian parameters must be finite");
  }
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ParameterError("Gaussian covariance must be symmetric");
  }
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw ParameterError("Gaussian opacity must be in (0, 1]");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sigma);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw ParameterError("Gaussian covariance must be positive definite");
  }
  max_eigenvalue_ = eig.eigenvalues().maxCoeff();
  sigma_inv_ = sigma.inverse();
}

double eval_gaussian(const Gaussian3D& g, const Eigen::Vector3d& p) {
  const Eigen::Vector3d x = p - g.mu();
  return std::exp(-0.5 * x.dot(g.sigma_inv() * x));
}

namespace {

struct Contribution {
  double t;
  int index;
  double sigma;
};

}  // namespace

RenderResult render(const GaussianSet& set, const Pose& pose, const CameraIntrinsics& intr,
                    const RenderOptions& options) {
  const int w = intr.width;
  const int h = intr.height;

  RenderResult out;
  out.image.image = Image(w, h, 0.f, 0.f, 0.f, true);
  out.image.intrinsics = intr;
  out.image.pose = pose;
  out.depth = DepthMap(w, h, 0.0, false);
  if (set.gaussians.empty()) {
    return out;
  }

  const int n = int(set.gaussians.size());
  const Eigen::Matrix3d rot = pose.rotation();

  // Camera-frame means and inverse covariances.
  std::vector<Eigen::Vector3d> mu_cam(n);
  std::vector<Eigen::Matrix3d> inv_cam(n);
  for (int i = 0; i < n; i++) {
    const Gaussian3D& g = set.gaussians[i];
    mu_cam[i] = pose.world_to_camera(g.mu());
    inv_cam[i] = rot * g.sigma_inv() * rot.transpose();
  }

  // Conservative screen bounds: every pixel whose ray passes within the
  // cutoff radius of a Gaussian must see it. The cutoff sphere is inflated
  // to its axis-aligned box, whose eight corners bound the projection.
  const int tile = std::max(1, options.tile_size);
  const int tiles_x = (w + tile - 1) / tile;
  const int tiles_y = (h + tile - 1) / tile;
  std::vector<std::vector<int>> bins(size_t(tiles_x) * tiles_y);

  // Largest angle between any pixel ray and the optical axis.
  double max_tan_sq = 0.0;
  for (const double px : {0.0, double(w)}) {
    for (const double py : {0.0, double(h)}) {
      const double dx = (px - intr.cx) / intr.fx;
      const double dy = (py - intr.cy) / intr.fy;
      max_tan_sq = std::max(max_tan_sq, dx * dx + dy * dy);
    }
  }
  const double max_ray_angle = std::atan(std::sqrt(max_tan_sq));

  for (int i = 0; i < n; i++) {
    const double radius =
        std::sqrt(options.mahalanobis_sq_cutoff * set.gaussians[i].max_eigenvalue());
    const Eigen::Vector3d& mu = mu_cam[i];
    const double dist = mu.norm();

    int x_lo = 0, x_hi = w - 1, y_lo = 0, y_hi = h - 1;
    bool full = false;
    bool skip = false;
    if (dist <= radius) {
      full = true;  // camera inside the cutoff sphere
    } else {
      const double axis_angle = std::acos(std::clamp(mu.z() / dist, -1.0, 1.0));
      const double cone = std::asin(std::min(1.0, radius / dist));
      if (axis_angle - cone > max_ray_angle) {
        skip = true;  // no pixel ray enters the cutoff cone
      } else {
        double u_min = 1e300, u_max = -1e300, v_min = 1e300, v_max = -1e300;
        bool corners_ok = true;
        for (int corner = 0; corner < 8 && corners_ok; corner++) {
          const Eigen::Vector3d c(mu.x() + ((corner & 1) ? radius : -radius),
                                  mu.y() + ((corner & 2) ? radius : -radius),
                                  mu.z() + ((corner & 4) ? radius : -radius));
          if (c.z() <= 1e-12) {
            corners_ok = false;
            break;
          }
          const double u = intr.fx * c.x() / c.z() + intr.cx;
          const double v = intr.fy * c.y() / c.z() + intr.cy;
          u_min = std::min(u_min, u);
          u_max = std::max(u_max, u);
          v_min = std::min(v_min, v);
          v_max = std::max(v_max, v);
        }
        if (corners_ok) {
          x_lo = std::max(0, int(std::floor(u_min - 0.5)));
          x_hi = std::min(w - 1, int(std::ceil(u_max - 0.5)));
          y_lo = std::max(0, int(std::floor(v_min - 0.5)));
          y_hi = std::min(h - 1, int(std::ceil(v_max - 0.5)));
          if (x_lo > x_hi || y_lo > y_hi) {
            skip = true;
          }
        } else {
          full = true;  // box straddles the camera plane; fall back
        }
      }
    }
    if (skip) {
      continue;
    }
    if (full) {
      x_lo = 0;
      x_hi = w - 1;
      y_lo = 0;
      y_hi = h - 1;
    }
    for (int ty = y_lo / tile; ty <= y_hi / tile; ty++) {
      for (int tx = x_lo / tile; tx <= x_hi / tile; tx++) {
        bins[size_t(ty) * tiles_x + tx].push_back(i);
      }
    }
  }

  parallel_for(0, h, [&](int y) {
    std::vector<Contribution> hits;
    for (int x = 0; x < w; x++) {
      const std::vector<int>& bin = bins[size_t(y / tile) * tiles_x + x / tile];
      if (bin.empty()) {
        continue;
      }
      const Eigen::Vector3d ray =
          Eigen::Vector3d((x + 0.5 - intr.cx) / intr.fx, (y + 0.5 - intr.cy) / intr.fy, 1.0)
              .normalized();

      hits.clear();
      for (int i : bin) {
        const double t = ray.dot(mu_cam[i]);
        if (t <= 0.0) {
          continue;
        }
        const Eigen::Vector3d x_vec = t * ray - mu_cam[i];
        const double m_sq = x_vec.dot(inv_cam[i] * x_vec);
        if (m_sq > options.mahalanobis_sq_cutoff) {
          continue;
        }
        hits.push_back({t, i, set.gaussians[i].alpha() * std::exp(-0.5 * m_sq)});
      }
      if (hits.empty()) {
        continue;
      }
      std::sort(hits.begin(), hits.end(), [](const Contribution& a, const Contribution& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.index < b.index;
      });

      double rgb[3] = {0, 0, 0};
      double depth_acc = 0.0;
      double weight_acc = 0.0;
      double transmittance = 1.0;
      for (const Contribution& c : hits) {
        const double weight = c.sigma * transmittance;
        const Eigen::Vector3f& color = set.gaussians[c.index].color();
        rgb[0] += weight * color.x();
        rgb[1] += weight * color.y();
        rgb[2] += weight * color.z();
        depth_acc += weight * c.t;
        weight_acc += weight;
        transmittance *= 1.0 - c.sigma;
        if (transmittance < options.min_transmittance) {
          break;
        }
      }
      if (weight_acc > 1.0 + 1e-9) {
        throw Error("render: accumulated opacity exceeded 1");
      }
      float* p = out.image.image.px(x, y);
      p[0] = float(rgb[0]);
      p[1] = float(rgb[1]);
      p[2] = float(rgb[2]);
      if (weight_acc >= options.min_accum_opacity) {
        out.depth.set(x, y, depth_acc / weight_acc);
        out.depth.set_valid(x, y, true);
      }
    }
  });
  return out;
}

namespace {

struct GridKey {
  int64_t x, y, z;
  bool operator==(const GridKey&) const = default;
};

struct GridKeyHash {
  size_t operator()(const GridKey& k) const {
    size_t h = std::hash<int64_t>()(k.x);
    h = h * 1000003 ^ std::hash<int64_t>()(k.y);
    h = h * 1000003 ^ std::hash<int64_t>()(k.z);
    return h;
  }
};

GridKey cell_of(const Eigen::Vector3d& p, double cell) {
  return {int64_t(std::floor(p.x() / cell)), int64_t(std::floor(p.y() / cell)),
          int64_t(std::floor(p.z() / cell))};
}

/// Exact mean distance of the k nearest neighbors, searched ring by ring on
/// a uniform grid. After finishing Chebyshev ring r every unexplored point
/// is at least r*cell away, so the search stops as soon as the k-th best
/// distance is within that bound.
class KnnGrid {
public:
  KnnGrid(const std::vector<Eigen::Vector3d>& points, double cell)
      : points_(points), cell_(cell) {
    for (size_t i = 0; i < points.size(); i++) {
      const GridKey key = cell_of(points[i], cell_);
      cells_[key].push_back(int(i));
      if (i == 0) {
        cell_lo_ = cell_hi_ = key;
      } else {
        cell_lo_ = {std::min(cell_lo_.x, key.x), std::min(cell_lo_.y, key.y),
                    std::min(cell_lo_.z, key.z)};
        cell_hi_ = {std::max(cell_hi_.x, key.x), std::max(cell_hi_.y, key.y),
                    std::max(cell_hi_.z, key.z)};
      }
    }
  }

  double mean_knn_distance(int query, int k) const {
    const Eigen::Vector3d& q = points_[query];
    const GridKey center = cell_of(q, cell_);
    const int64_t last_ring =
        std::max({center.x - cell_lo_.x, cell_hi_.x - center.x, center.y - cell_lo_.y,
                  cell_hi_.y - center.y, center.z - cell_lo_.z, cell_hi_.z - center.z, int64_t(0)});
    std::vector<double> best;  // squared distances, ascending

    for (int64_t ring = 0; ring <= last_ring; ring++) {
      for (int64_t dz = -ring; dz <= ring; dz++) {
        for (int64_t dy = -ring; dy <= ring; dy++) {
          for (int64_t dx = -ring; dx <= ring; dx++) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) {
              continue;
            }
            const auto it = cells_.find({center.x + dx, center.y + dy, center.z + dz});
            if (it == cells_.end()) {
              continue;
            }
            for (int idx : it->second) {
              if (idx == query) {
                continue;
              }
              const double d_sq = (points_[idx] - q).squaredNorm();
              const auto pos = std::upper_bound(best.begin(), best.end(), d_sq);
              if (best.size() < size_t(k)) {
                best.insert(pos, d_sq);
              } else if (pos != best.end()) {
                best.insert(pos, d_sq);
                best.pop_back();
              }
            }
          }
        }
      }
      const double ring_bound = double(ring) * cell_;
      if (best.size() >= size_t(k) && std::sqrt(best.back()) <= ring_bound) {
        break;
      }
    }

    if (best.empty()) {
      return 1.0;  // single-point cloud: documented unit-spacing fallback
    }
    double sum = 0.0;
    for (double d_sq : best) {
      sum += std::sqrt(d_sq);
    }
    return sum / double(best.size());
  }

private:
  const std::vector<Eigen::Vector3d>& points_;
  double cell_;
  GridKey cell_lo_{0, 0, 0};
  GridKey cell_hi_{0, 0, 0};
  std::unordered_map<GridKey, std::vector<int>, GridKeyHash> cells_;
};

}  // namespace

GaussianSet pointcloud_to_gaussians(const PointCloud& cloud,
                                    const GaussianConversionOptions& options) {
  if (cloud.size() == 0) {
    throw ParameterError("pointcloud_to_gaussians: empty cloud");
  }
  if (options.knn < 1 || !(options.radius_multiplier > 0.0)) {
    throw ParameterError("pointcloud_to_gaussians: invalid options");
  }

  // Cell size targeting a few points per cell for surface-like clouds.
  Eigen::Vector3d lo = cloud.positions[0];
  Eigen::Vector3d hi = cloud.positions[0];
  for (const Eigen::Vector3d& p : cloud.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  const double cell = diag > 0.0
                          ? std::max(diag / std::max(8.0, std::cbrt(double(cloud.size())) * 4.0),
                                     diag * 1e-6)
                          : 1.0;

  const KnnGrid grid(cloud.positions, cell);
  const int n = int(cloud.size());
  std::vector<double> sigma_scalar(n);
  parallel_for(0, n, [&](int i) {
    sigma_scalar[i] = std::max(options.radius_multiplier * grid.mean_knn_distance(i, options.knn),
                               options.min_sigma);
  });

  GaussianSet set;
  set.gaussians.reserve(n);
  for (int i = 0; i < n; i++) {
    const double s = sigma_scalar[i];
    set.gaussians.emplace_back(cloud.positions[i],
                               Eigen::Matrix3d::Identity() * (s * s), options.alpha,
                               cloud.colors[i]);
  }
  return set;
}

namespace {

std::string index_name(const char* prefix, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04zu", prefix, i);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParameterError("cannot open for writing: " + path.string());
  }
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingInputError("cannot open: " + path.string());
  }
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

void export_training_bundle(const std::string& dir, const TrainingBundle& bundle) {
  if (bundle.base_images.size() != bundle.cameras.base.size()) {
    throw ParameterError("training bundle: base image/camera counts differ");
  }
  if (bundle.supp_images.size() != bundle.cameras.supplementary.size() ||
      bundle.supp_masks.size() != bundle.supp_images.size()) {
    throw ParameterError("training bundle: supplementary image/camera/mask counts differ");
  }
  if (bundle.moving_images.size() != bundle.moving_cameras.size()) {
    throw ParameterError("training bundle: moving image/camera counts differ");
  }
  for (size_t i = 0; i < bundle.supp_masks.size(); i++) {
    if (bundle.supp_masks[i].width != bundle.supp_images[i].width ||
        bundle.supp_masks[i].height != bundle.supp_images[i].height) {
      throw ParameterError("training bundle: mask dimensions differ from image");
    }
  }

  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");

  // cameras.json carries the base/supplementary set plus the moving cameras.
  {
    const std::string set_json = camera_set_to_json(bundle.cameras);
    const std::string inner = set_json.substr(1, set_json.size() - 2);
    JsonWriter moving;
    moving.begin_array();
    for (const Camera& cam : bundle.moving_cameras) {
      moving.begin_object();
      moving.key("position").begin_array();
      for (int i = 0; i < 3; i++) {
        moving.value(cam.pose.position()(i));
      }
      moving.end_array();
      moving.key("rotation").begin_array();
      for (int i = 0; i < 3; i++) {
        for (int j = 0; j < 3; j++) {
          moving.value(cam.pose.rotation()(i, j));
        }
      }
      moving.end_array();
      moving.key("fx").value(cam.intrinsics.fx);
      moving.key("fy").value(cam.intrinsics.fy);
      moving.key("cx").value(cam.intrinsics.cx);
      moving.key("cy").value(cam.intrinsics.cy);
      moving.key("width").value(cam.intrinsics.width);
      moving.key("height").value(cam.intrinsics.height);
      moving.end_object();
    }
    moving.end_array();
    write_text_file(root / "cameras.json",
                    "{" + inner + ",\"moving\":" + moving.str() + "}");
  }

  std::vector<std::string> stage1;
  std::vector<std::string> stage2;
  for (size_t i = 0; i < bundle.base_images.size(); i++) {
    const std::string name = index_name("base", i);
    write_png((root / "images" / (name + ".png")).string(), bundle.base_images[i]);
    stage1.push_back(name);
  }
  for (size_t i = 0; i < bundle.moving_images.size(); i++) {
    const std::string name = index_name("moving", i);
    write_png((root / "images" / (name + ".png")).string(), bundle.moving_images[i]);
    stage1.push_back(name);
  }
  for (size_t i = 0; i < bundle.supp_images.size(); i++) {
    const std::string name = index_name("supp", i);
    write_png((root / "images" / (name + ".png")).string(), bundle.supp_images[i]);
    write_mask_png((root / "masks" / (name + ".png")).string(), bundle.supp_masks[i]);
    stage2.push_back(name);
  }

  write_ply((root / "points.ply").string(), bundle.cloud);

  JsonWriter manifest;
  manifest.begin_object();
  manifest.key("stage_boundary").value(bundle.stage_boundary);
  manifest.key("stage1").begin_array();
  for (const std::string& id : stage1) {
    manifest.value(id);
  }
  manifest.end_array();
  manifest.key("stage2").begin_array();
  for (const std::string& id : stage2) {
    manifest.value(id);
  }
  manifest.end_array();
  manifest.end_object();
  write_text_file(root / "manifest.json", manifest.str());
}

TrainingBundle read_training_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);

  TrainingBundle bundle;
  const std::string cams_text = read_text_file(root / "cameras.json");
  bundle.cameras = camera_set_from_json(cams_text);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(cams_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("cameras.json parse error: ") + e.what());
  }
  for (const auto& c : j.at("moving")) {
    Eigen::Vector3d pos;
    for (int i = 0; i < 3; i++) {
      pos(i) = c.at("position")[i].get<double>();
    }
    Eigen::Matrix3d rot;
    for (int i = 0; i < 3; i++) {
      for (int k = 0; k < 3; k++) {
        rot(i, k) = c.at("rotation")[3 * i + k].get<double>();
      }
    }
    bundle.moving_cameras.push_back(
        {Pose(rot, pos),
         CameraIntrinsics(c.at("fx").get<double>(), c.at("fy").get<double>(),
                          c.at("cx").get<double>(), c.at("cy").get<double>(),
                          c.at("width").get<int>(), c.at("height").get<int>())});
  }

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(root / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("manifest.json parse error: ") + e.what());
  }
  bundle.stage_boundary = manifest.at("stage_boundary").get<int>();

  for (size_t i = 0; i < bundle.cameras.base.size(); i++) {
    bundle.base_images.push_back(
        read_png((root / "images" / (index_name("base", i) + ".png")).string()));
  }
  for (size_t i = 0; i < bundle.moving_cameras.size(); i++) {
    bundle.moving_images.push_back(
        read_png((root / "images" / (index_name("moving", i) + ".png")).string()));
  }
  for (size_t i = 0; i < bundle.cameras.supplementary.size(); i++) {
    bundle.supp_images.push_back(
        read_png((root / "images" / (index_name("supp", i) + ".png")).string()));
    bundle.supp_masks.push_back(read_mask_png(
        (root / "masks" / (index_name("supp", i) + ".png")).string(), MaskKind::kOcclusion));
  }
  bundle.cloud = read_ply((root / "points.ply").string());
  return bundle;
}

}  // namespace panoscene
