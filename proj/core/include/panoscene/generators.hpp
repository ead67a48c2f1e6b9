#pragma once

#include <memory>
#include <string>
#include <vector>

#include "panoscene/camera.hpp"
#include "panoscene/image.hpp"

namespace panoscene {

/// What the deterministic stub backends pretend the scene is.
struct StubSceneConfig {
  enum class Mode {
    kConstantDepth,  // every ray hits at a fixed range
    kSphereRoom,     // room is a sphere of the given radius centered at the origin
    kBoxRoom,        // axis-aligned cube room with the given half extent
  };
  Mode mode = Mode::kConstantDepth;
  double depth = 3.0;  // constant range, sphere radius, or box half extent
};

/// Fills the pixels inside `mask` by copying the nearest pixel outside it
/// (4-connected BFS distance; among equidistant sources the smallest
/// (row, column) wins). With no source pixels at all the fill is 0.5 gray.
/// Pixels outside the mask are returned bit-identical.
Image nearest_valid_fill(const Image& image, const ViewMask& mask, bool wrap_horizontal = false);

class Inpainter {
public:
  virtual ~Inpainter() = default;
  /// Must leave pixels outside `mask` untouched; the orchestrator verifies.
  virtual PerspectiveImage inpaint(const PerspectiveImage& image, const ViewMask& mask,
                                   const std::string& instruction) = 0;
};

class PanoInpainter {
public:
  virtual ~PanoInpainter() = default;
  virtual EquirectImage inpaint(const EquirectImage& pano, const ViewMask& mask) = 0;
};

class SuperResolver {
public:
  virtual ~SuperResolver() = default;
  /// 4x upscale (the 512 -> 2048 contract).
  virtual Image upscale(const Image& image) = 0;
};

class PanoDepthEstimator {
public:
  virtual ~PanoDepthEstimator() = default;
  virtual DepthMap estimate(const EquirectImage& pano) = 0;
};

struct WarpRefineResult {
  PerspectiveImage image;
  ViewMask occlusion;  // destination pixels the warp could not cover
};

class WarpRefiner {
public:
  virtual ~WarpRefiner() = default;
  /// Renders `image` (with per-pixel range `depth`) from the camera moved by
  /// `relative_pose` (source-camera frame), returning the refined view and
  /// its occlusion mask.
  virtual WarpRefineResult refine(const PerspectiveImage& image, const DepthMap& depth,
                                  const Pose& relative_pose, const CameraIntrinsics& intrinsics) = 0;
};

struct SynthesizedViews {
  std::vector<Image> frames;
  std::vector<DepthMap> depths;
  std::vector<Pose> poses;  // world frame; poses[0] equals the initial pose
  CameraIntrinsics intrinsics;
};

class ViewSynthesizer {
public:
  virtual ~ViewSynthesizer() = default;
  /// trajectory[0] must equal the initial image's pose; frame_count must
  /// match the trajectory length.
  virtual SynthesizedViews synthesize(const PerspectiveImage& initial,
                                      const std::vector<Pose>& trajectory, int frame_count) = 0;
};

enum class BackendKind { kStub, kRemote };

struct GeneratorSuite {
  std::shared_ptr<Inpainter> inpainter;
  std::shared_ptr<PanoInpainter> pano_inpainter;
  std::shared_ptr<SuperResolver> super_resolver;
  std::shared_ptr<PanoDepthEstimator> depth_estimator;
  std::shared_ptr<WarpRefiner> warp_refiner;
  std::shared_ptr<ViewSynthesizer> view_synthesizer;
  BackendKind kind = BackendKind::kStub;
};

GeneratorSuite make_stub_suite(const StubSceneConfig& scene = {});

/// Throws ParameterError if any plugin handle is null.
void validate_suite(const GeneratorSuite& suite);

struct RemoteConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  double timeout_s = 30.0;
  /// Forwarded as params.seed on every call for backends with sampling.
  uint64_t seed = 0;
};

/// HTTP backends speaking the JSON+base64 protocol on
/// POST /v1/{inpaint|superres|warp|views|panodepth}. Transport failures and
/// non-200 responses raise TransportError after one retry.
GeneratorSuite make_remote_suite(const RemoteConfig& config);

/// Environment variable consulted for the endpoint base URL when none is
/// configured explicitly.
inline constexpr const char* kEndpointEnvVar = "PANOSCENE_ENDPOINT";

/// Range along each pixel ray of the stub scene from an arbitrary camera;
/// pixels whose ray misses the scene are invalid.
DepthMap stub_scene_depth(const StubSceneConfig& scene, const Pose& pose,
                          const CameraIntrinsics& intrinsics);

}  // namespace panoscene
