#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panoscene/camera.hpp"
#include "panoscene/generators.hpp"
#include "panoscene/panorama.hpp"
#include "panoscene/splat.hpp"

namespace panoscene {

struct TrajectoryStep {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
};

/// One user-defined scene extension: frames synthesized along a trajectory
/// starting at a composed view. The first frame is always that view, so the
/// total frame count is 1 + trajectory.size().
struct MovingSceneSpec {
  int initial_view = 0;
  int sample_count = 8;  // frames kept for reconstruction
  std::vector<TrajectoryStep> trajectory;
};

struct CameraParams {
  int count = 80;
  double fov_deg = 60.0;
  int resolution = 512;
  /// Explicit supplementary offset in world units; 0 means
  /// offset_scale * median panorama depth.
  double offset_world = 0.0;
  double offset_scale = 0.05;
};

struct PipelineConfig {
  PanoramaPlan plan;
  CameraParams cameras;
  std::vector<MovingSceneSpec> moving;
  std::string generators = "stub";  // "stub" or an endpoint base URL
  double timeout_s = 30.0;
  StubSceneConfig stub_scene;
  std::string output_dir = "out";
  uint64_t seed = 0;
  int stage_boundary = 5000;
  GaussianConversionOptions splat;
};

PipelineConfig config_from_json(const std::string& text);
PipelineConfig config_from_file(const std::string& path);
/// Canonical serialization used for the config snapshot every stage hashes;
/// excludes output_dir so relocating a tree does not invalidate it.
std::string config_to_json(const PipelineConfig& config);

GeneratorSuite make_suite_for(const PipelineConfig& config);

/// Exclusive ownership of a pipeline output directory via a .lock file.
class DirectoryLock {
public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
  std::filesystem::path path_;
};

struct StageContext {
  PipelineConfig config;
  std::filesystem::path root;  // output directory
  GeneratorSuite suite;
  bool progress_json = false;
};

/// Tracks a stage's input and output files and writes
/// <root>/<stage>/manifest.json with their content hashes. A stage whose
/// recorded input hashes match the files on disk and whose outputs all
/// verify is skipped (rerun is a no-op).
class StageRunner {
public:
  StageRunner(StageContext& ctx, const std::string& stage);

  /// Registers an input file; throws MissingInputError if absent.
  void require_input(const std::filesystem::path& file);
  bool up_to_date() const;
  std::filesystem::path dir() const { return ctx_.root / stage_; }
  void add_output(const std::filesystem::path& file);
  /// Hashes outputs and writes the manifest.
  void finish();

  void progress(const std::string& event) const;

private:
  std::string relative(const std::filesystem::path& file) const;

  StageContext& ctx_;
  std::string stage_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::filesystem::path> outputs_;
};

// Pipeline stages, in order. Each reads its inputs from files written by the
// previous stages, so any stage can be rerun in isolation.
void run_compose(StageContext& ctx);
void run_lift(StageContext& ctx);
void run_supp(StageContext& ctx);
void run_move(StageContext& ctx);
void run_align(StageContext& ctx);
void run_fuse(StageContext& ctx);
void run_render(StageContext& ctx);
void run_export(StageContext& ctx);
void run_all(StageContext& ctx);

}  // namespace panoscene
