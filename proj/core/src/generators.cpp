#include "panoscene/generators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "panoscene/errors.hpp"
#include "panoscene/projection.hpp"

namespace panoscene {

namespace {

/// Exit range of a ray from inside the [-s, s]^3 box; 0 if the origin is
/// outside or the ray never leaves through a finite face.
double box_exit_range(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, double s) {
  if (origin.cwiseAbs().maxCoeff() >= s) {
    return 0.0;
  }
  double t = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; axis++) {
    if (dir(axis) > 0.0) {
      t = std::min(t, (s - origin(axis)) / dir(axis));
    } else if (dir(axis) < 0.0) {
      t = std::min(t, (-s - origin(axis)) / dir(axis));
    }
  }
  return std::isfinite(t) ? t : 0.0;
}

}  // namespace

Image nearest_valid_fill(const Image& image, const ViewMask& mask, bool wrap_horizontal) {
  if (mask.width != image.width || mask.height != image.height) {
    throw ParameterError("nearest_valid_fill: mask dimensions differ from image");
  }
  const int w = image.width;
  const int h = image.height;
  const size_t total = size_t(w) * h;

  Image out = image;

  // Pass 1: multi-source BFS distances from every pixel outside the mask.
  constexpr int kUnreached = std::numeric_limits<int>::max();
  std::vector<int> dist(total, kUnreached);
  std::deque<int> queue;
  for (size_t i = 0; i < total; i++) {
    if (!mask.bits[i]) {
      dist[i] = 0;
      queue.push_back(int(i));
    }
  }

  if (queue.empty()) {
    // Nothing to copy from; deterministic mid-gray.
    for (size_t i = 0; i < total; i++) {
      out.pixels[3 * i] = 0.5f;
      out.pixels[3 * i + 1] = 0.5f;
      out.pixels[3 * i + 2] = 0.5f;
      out.valid[i] = 1;
    }
    return out;
  }

  int max_dist = 0;
  const auto neighbors = [&](int idx, auto&& visit) {
    const int x = idx % w;
    const int y = idx / w;
    if (y > 0) visit(idx - w);
    if (y + 1 < h) visit(idx + w);
    if (wrap_horizontal) {
      visit(y * w + (x == 0 ? w - 1 : x - 1));
      visit(y * w + (x + 1 == w ? 0 : x + 1));
    } else {
      if (x > 0) visit(idx - 1);
      if (x + 1 < w) visit(idx + 1);
    }
  };
  while (!queue.empty()) {
    const int idx = queue.front();
    queue.pop_front();
    neighbors(idx, [&](int nb) {
      if (dist[nb] == kUnreached) {
        dist[nb] = dist[idx] + 1;
        max_dist = std::max(max_dist, dist[nb]);
        queue.push_back(nb);
      }
    });
  }

  // Pass 2: resolve each masked pixel to a source, layer by layer, taking
  // the lexicographically smallest (row, col) source among shortest paths.
  std::vector<int> source(total, -1);
  std::vector<std::vector<int>> layers(max_dist + 1);
  for (size_t i = 0; i < total; i++) {
    if (dist[i] != kUnreached) {
      layers[dist[i]].push_back(int(i));
    }
    if (dist[i] == 0) {
      source[i] = int(i);
    }
  }
  for (int d = 1; d <= max_dist; d++) {
    for (int idx : layers[d]) {
      int best = std::numeric_limits<int>::max();
      neighbors(idx, [&](int nb) {
        if (dist[nb] == d - 1 && source[nb] < best) {
          best = source[nb];
        }
      });
      source[idx] = best;
    }
  }

  for (size_t i = 0; i < total; i++) {
    if (!mask.bits[i]) {
      continue;
    }
    const int src = source[i];
    if (src >= 0) {
      out.pixels[3 * i] = image.pixels[3 * size_t(src)];
      out.pixels[3 * i + 1] = image.pixels[3 * size_t(src) + 1];
      out.pixels[3 * i + 2] = image.pixels[3 * size_t(src) + 2];
      out.valid[i] = 1;
    }
  }
  return out;
}

DepthMap stub_scene_depth(const StubSceneConfig& scene, const Pose& pose,
                          const CameraIntrinsics& intr) {
  DepthMap depth(intr.width, intr.height, 0.0, false);
  if (scene.mode == StubSceneConfig::Mode::kConstantDepth) {
    for (int y = 0; y < intr.height; y++) {
      for (int x = 0; x < intr.width; x++) {
        depth.set(x, y, scene.depth);
        depth.set_valid(x, y, true);
      }
    }
    return depth;
  }

  const double r_sq = scene.depth * scene.depth;
  const Eigen::Vector3d c = pose.position();
  for (int y = 0; y < intr.height; y++) {
    for (int x = 0; x < intr.width; x++) {
      const Eigen::Vector3d ray((x + 0.5 - intr.cx) / intr.fx, (y + 0.5 - intr.cy) / intr.fy, 1.0);
      const Eigen::Vector3d d = pose.direction_to_world(ray.normalized());
      double t = 0.0;
      if (scene.mode == StubSceneConfig::Mode::kSphereRoom) {
        // Range to the far sphere intersection.
        const double b = c.dot(d);
        const double disc = b * b - c.squaredNorm() + r_sq;
        if (disc >= 0.0) {
          t = -b + std::sqrt(disc);
        }
      } else {
        t = box_exit_range(c, d, scene.depth);
      }
      if (t > 0.0) {
        depth.set(x, y, t);
        depth.set_valid(x, y, true);
      }
    }
  }
  return depth;
}

namespace {

class StubInpainter final : public Inpainter {
public:
  PerspectiveImage inpaint(const PerspectiveImage& image, const ViewMask& mask,
                           const std::string&) override {
    PerspectiveImage out = image;
    out.image = nearest_valid_fill(image.image, mask);
    return out;
  }
};

class StubPanoInpainter final : public PanoInpainter {
public:
  EquirectImage inpaint(const EquirectImage& pano, const ViewMask& mask) override {
    return EquirectImage(nearest_valid_fill(pano.image, mask, /*wrap_horizontal=*/true));
  }
};

class StubSuperResolver final : public SuperResolver {
public:
  Image upscale(const Image& image) override { return bilinear_upscale(image, 4); }
};

class StubPanoDepth final : public PanoDepthEstimator {
public:
  explicit StubPanoDepth(const StubSceneConfig& scene) : scene_(scene) {}

  DepthMap estimate(const EquirectImage& pano) override {
    // The panorama viewpoint is the origin. Constant and sphere modes give a
    // constant range there; the box room varies with direction.
    DepthMap depth(pano.width(), pano.height(), 0.0, false);
    for (int y = 0; y < pano.height(); y++) {
      for (int x = 0; x < pano.width(); x++) {
        if (!pano.image.is_valid(x, y)) {
          continue;
        }
        double range = scene_.depth;
        if (scene_.mode == StubSceneConfig::Mode::kBoxRoom) {
          const Eigen::Vector3d dir =
              equirect_direction_continuous(x, y, pano.width(), pano.height());
          range = box_exit_range(Eigen::Vector3d::Zero(), dir, scene_.depth);
        }
        if (range > 0.0) {
          depth.set(x, y, range);
          depth.set_valid(x, y, true);
        }
      }
    }
    return depth;
  }

private:
  StubSceneConfig scene_;
};

class StubWarpRefiner final : public WarpRefiner {
public:
  WarpRefineResult refine(const PerspectiveImage& src, const DepthMap& depth,
                          const Pose& relative_pose, const CameraIntrinsics& intr) override {
    if (depth.width != src.image.width || depth.height != src.image.height) {
      throw ParameterError("warp_refine: depth dimensions differ from image");
    }

    WarpRefineResult out;
    out.image.intrinsics = intr;
    out.image.pose = pose_compose(relative_pose, src.pose);
    out.image.image = Image(intr.width, intr.height, 0.f, 0.f, 0.f, false);
    out.occlusion = ViewMask(intr.width, intr.height, MaskKind::kOcclusion, true);

    // Forward splat with a z-buffer; source pixels scanned in row order so
    // equal-depth collisions resolve to the first writer.
    std::vector<double> zbuf(size_t(intr.width) * intr.height,
                             std::numeric_limits<double>::infinity());
    const CameraIntrinsics& sk = src.intrinsics;
    for (int y = 0; y < src.image.height; y++) {
      for (int x = 0; x < src.image.width; x++) {
        if (!src.image.is_valid(x, y) || !depth.is_valid(x, y)) {
          continue;
        }
        const Eigen::Vector3d ray((x + 0.5 - sk.cx) / sk.fx, (y + 0.5 - sk.cy) / sk.fy, 1.0);
        const Eigen::Vector3d p_src = depth.at(x, y) * ray.normalized();
        const Eigen::Vector3d p_dst = relative_pose.world_to_camera(p_src);
        if (p_dst.z() <= 0.0) {
          continue;
        }
        const double pu = intr.fx * p_dst.x() / p_dst.z() + intr.cx;
        const double pv = intr.fy * p_dst.y() / p_dst.z() + intr.cy;
        if (pu < 0.0 || pu >= intr.width || pv < 0.0 || pv >= intr.height) {
          continue;
        }
        const int dx = int(pu);
        const int dy = int(pv);
        const double range = p_dst.norm();
        const size_t idx = size_t(dy) * intr.width + dx;
        if (range < zbuf[idx]) {
          zbuf[idx] = range;
          const float* s = src.image.px(x, y);
          float* t = out.image.image.px(dx, dy);
          t[0] = s[0];
          t[1] = s[1];
          t[2] = s[2];
          out.image.image.set_valid(dx, dy, true);
          out.occlusion.set(dx, dy, false);
        }
      }
    }

    out.image.image = nearest_valid_fill(out.image.image, out.occlusion);
    return out;
  }
};

class StubViewSynthesizer final : public ViewSynthesizer {
public:
  explicit StubViewSynthesizer(const StubSceneConfig& scene) : scene_(scene) {}

  SynthesizedViews synthesize(const PerspectiveImage& initial, const std::vector<Pose>& trajectory,
                              int frame_count) override {
    if (trajectory.empty()) {
      throw ParameterError("synthesize_views: empty trajectory");
    }
    if (frame_count != int(trajectory.size())) {
      throw ParameterError("synthesize_views: frame_count must match trajectory length");
    }
    const Pose& start = trajectory.front();
    if ((start.rotation() - initial.pose.rotation()).cwiseAbs().maxCoeff() > 1e-9 ||
        (start.position() - initial.pose.position()).cwiseAbs().maxCoeff() > 1e-9) {
      throw ParameterError("synthesize_views: trajectory[0] must equal the initial pose");
    }

    SynthesizedViews out;
    out.intrinsics = initial.intrinsics;
    out.poses = trajectory;
    out.frames.reserve(trajectory.size());
    out.depths.reserve(trajectory.size());

    PerspectiveImage current = initial;
    current.pose = trajectory.front();
    out.frames.push_back(current.image);
    out.depths.push_back(stub_scene_depth(scene_, current.pose, initial.intrinsics));

    StubWarpRefiner warp;
    for (size_t i = 1; i < trajectory.size(); i++) {
      const Pose relative = pose_compose(trajectory[i], pose_inverse(current.pose));
      WarpRefineResult step = warp.refine(current, out.depths[i - 1], relative, initial.intrinsics);
      step.image.pose = trajectory[i];
      current = step.image;
      out.frames.push_back(current.image);
      out.depths.push_back(stub_scene_depth(scene_, trajectory[i], initial.intrinsics));
    }
    return out;
  }

private:
  StubSceneConfig scene_;
};

}  // namespace

void validate_suite(const GeneratorSuite& suite) {
  if (!suite.inpainter || !suite.pano_inpainter || !suite.super_resolver ||
      !suite.depth_estimator || !suite.warp_refiner || !suite.view_synthesizer) {
    throw ParameterError("generator suite has a null plugin handle");
  }
}

GeneratorSuite make_stub_suite(const StubSceneConfig& scene) {
  GeneratorSuite suite;
  suite.inpainter = std::make_shared<StubInpainter>();
  suite.pano_inpainter = std::make_shared<StubPanoInpainter>();
  suite.super_resolver = std::make_shared<StubSuperResolver>();
  suite.depth_estimator = std::make_shared<StubPanoDepth>(scene);
  suite.warp_refiner = std::make_shared<StubWarpRefiner>();
  suite.view_synthesizer = std::make_shared<StubViewSynthesizer>(scene);
  suite.kind = BackendKind::kStub;
  return suite;
}

}  // namespace panoscene
