#include "panoscene/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>

#include <json.hpp>

#include "panoscene/depth_align.hpp"
#include "panoscene/errors.hpp"
#include "panoscene/json_writer.hpp"
#include "panoscene/pfm_io.hpp"
#include "panoscene/png_io.hpp"
#include "panoscene/point_cloud.hpp"
#include "panoscene/projection.hpp"
#include "panoscene/sha256.hpp"

namespace panoscene {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingInputError("cannot open: " + path.string());
  }
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParameterError("cannot open for writing: " + path.string());
  }
  out << text;
  if (!out) {
    throw ParameterError("failed writing: " + path.string());
  }
}

std::string frame_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
  return buf;
}

std::string camera_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, i);
  return buf;
}

std::string scene_dir_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%02d", i);
  return buf;
}

void write_pose_fields(JsonWriter& w, const Pose& pose) {
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
}

Pose pose_from_json(const nlohmann::json& j) {
  Eigen::Vector3d pos;
  for (int i = 0; i < 3; i++) {
    pos(i) = j.at("position")[i].get<double>();
  }
  Eigen::Matrix3d rot;
  for (int i = 0; i < 3; i++) {
    for (int k = 0; k < 3; k++) {
      rot(i, k) = j.at("rotation")[3 * i + k].get<double>();
    }
  }
  return Pose(rot, pos);
}

ViewMask validity_as_mask(const Image& image) {
  ViewMask mask(image.width, image.height, MaskKind::kBounds);
  for (size_t i = 0; i < image.valid.size(); i++) {
    mask.bits[i] = image.valid[i];
  }
  return mask;
}

void apply_mask_as_validity(Image& image, const ViewMask& mask) {
  for (size_t i = 0; i < image.valid.size(); i++) {
    image.valid[i] = mask.bits[i];
  }
}

double median_valid_depth(const DepthMap& depth) {
  std::vector<double> values;
  values.reserve(depth.values.size());
  for (size_t i = 0; i < depth.values.size(); i++) {
    if (depth.valid[i] && depth.values[i] > 0.0) {
      values.push_back(depth.values[i]);
    }
  }
  if (values.empty()) {
    throw DegenerateInputError("panorama depth has no valid pixels");
  }
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

fs::path snapshot_config(const StageContext& ctx) {
  const fs::path path = ctx.root / "config.json";
  const std::string text = config_to_json(ctx.config);
  bool up_to_date = false;
  if (fs::exists(path)) {
    up_to_date = read_text_file(path) == text;
  }
  if (!up_to_date) {
    write_text_file(path, text);
  }
  return path;
}

struct ViewsFile {
  CameraIntrinsics intrinsics;
  std::vector<Pose> poses;
};

ViewsFile read_views_file(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("views.json parse error: " + std::string(e.what()));
  }
  ViewsFile out;
  out.intrinsics =
      CameraIntrinsics(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                       j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>());
  for (const auto& v : j.at("views")) {
    out.poses.push_back(pose_from_json(v));
  }
  return out;
}

struct ScenePosesFile {
  CameraIntrinsics intrinsics;
  std::vector<Pose> poses;
  std::vector<int> source_indices;
};

ScenePosesFile read_scene_poses(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("poses.json parse error: " + std::string(e.what()));
  }
  ScenePosesFile out;
  out.intrinsics =
      CameraIntrinsics(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                       j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>());
  for (const auto& f : j.at("frames")) {
    out.poses.push_back(pose_from_json(f));
    out.source_indices.push_back(f.at("index").get<int>());
  }
  return out;
}

}  // namespace

PipelineConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config parse error: ") + e.what());
  }

  PipelineConfig cfg;
  if (j.contains("plan")) {
    cfg.plan = plan_from_json(j.at("plan").dump());
  } else {
    cfg.plan = default_panorama_plan();
  }
  if (j.contains("cameras")) {
    const auto& c = j.at("cameras");
    cfg.cameras.count = c.value("count", 80);
    cfg.cameras.fov_deg = c.value("fov_deg", 60.0);
    cfg.cameras.resolution = c.value("resolution", 512);
    cfg.cameras.offset_world = c.value("offset_world", 0.0);
    cfg.cameras.offset_scale = c.value("offset_scale", 0.05);
  }
  if (j.contains("moving")) {
    for (const auto& m : j.at("moving")) {
      MovingSceneSpec spec;
      spec.initial_view = m.value("initial_view", 0);
      spec.sample_count = m.value("sample_count", 8);
      if (m.contains("trajectory")) {
        for (const auto& t : m.at("trajectory")) {
          TrajectoryStep step;
          if (t.contains("position")) {
            for (int i = 0; i < 3; i++) {
              step.position(i) = t.at("position")[i].get<double>();
            }
          }
          step.yaw_deg = t.value("yaw_deg", 0.0);
          step.pitch_deg = t.value("pitch_deg", 0.0);
          spec.trajectory.push_back(step);
        }
      }
      cfg.moving.push_back(spec);
    }
  }
  cfg.generators = j.value("generators", std::string("stub"));
  cfg.timeout_s = j.value("timeout_s", 30.0);
  if (j.contains("stub_scene")) {
    const auto& s = j.at("stub_scene");
    const std::string mode = s.value("mode", std::string("constant"));
    if (mode == "constant") {
      cfg.stub_scene.mode = StubSceneConfig::Mode::kConstantDepth;
    } else if (mode == "sphere") {
      cfg.stub_scene.mode = StubSceneConfig::Mode::kSphereRoom;
    } else if (mode == "box") {
      cfg.stub_scene.mode = StubSceneConfig::Mode::kBoxRoom;
    } else {
      throw ParameterError("config: unknown stub_scene mode " + mode);
    }
    cfg.stub_scene.depth = s.value("depth", 3.0);
  }
  cfg.output_dir = j.value("output_dir", std::string("out"));
  cfg.seed = j.value("seed", uint64_t(0));
  cfg.stage_boundary = j.value("stage_boundary", 5000);
  if (j.contains("splat")) {
    const auto& s = j.at("splat");
    cfg.splat.alpha = s.value("alpha", 0.9);
    cfg.splat.radius_multiplier = s.value("radius_multiplier", 1.0);
    cfg.splat.knn = s.value("knn", 3);
    cfg.splat.min_sigma = s.value("min_sigma", 0.0);
  }

  // Fail on violated stage preconditions now, not mid-pipeline.
  validate_plan(cfg.plan);
  if (cfg.cameras.count < 1) {
    throw ParameterError("config: cameras.count must be >= 1");
  }
  if (!(cfg.cameras.fov_deg > 0.0) || !(cfg.cameras.fov_deg < 180.0)) {
    throw ParameterError("config: cameras.fov_deg must be in (0, 180)");
  }
  if (cfg.cameras.resolution < 2) {
    throw ParameterError("config: cameras.resolution must be >= 2");
  }
  if (cfg.cameras.offset_world < 0.0 || (cfg.cameras.offset_world == 0.0 &&
                                         !(cfg.cameras.offset_scale > 0.0))) {
    throw ParameterError("config: supplementary offset must be positive");
  }
  for (const MovingSceneSpec& m : cfg.moving) {
    if (m.initial_view < 0 || m.initial_view >= int(cfg.plan.schedule.size())) {
      throw ParameterError("config: moving initial_view out of schedule range");
    }
    if (m.sample_count < 1) {
      throw ParameterError("config: moving sample_count must be >= 1");
    }
  }
  if (!(cfg.timeout_s > 0.0)) {
    throw ParameterError("config: timeout_s must be positive");
  }
  if (cfg.splat.knn < 1 || !(cfg.splat.alpha > 0.0) || cfg.splat.alpha > 1.0 ||
      !(cfg.splat.radius_multiplier > 0.0) || cfg.splat.min_sigma < 0.0) {
    throw ParameterError("config: invalid splat options");
  }
  if (!(cfg.stub_scene.depth > 0.0)) {
    throw ParameterError("config: stub_scene.depth must be positive");
  }
  return cfg;
}

PipelineConfig config_from_file(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config parse error: ") + e.what());
  }
  if (j.contains("plan_file")) {
    const fs::path plan_path = fs::path(path).parent_path() / j.at("plan_file").get<std::string>();
    j["plan"] = nlohmann::json::parse(read_text_file(plan_path));
    j.erase("plan_file");
  }
  return config_from_json(j.dump());
}

std::string config_to_json(const PipelineConfig& cfg) {
  JsonWriter w;
  w.begin_object();
  w.key("plan");
  w.begin_object();
  w.key("prompt").value(cfg.plan.prompt);
  w.key("fov_deg").value(cfg.plan.fov_deg);
  w.key("schedule").begin_array();
  for (const ScheduleEntry& e : cfg.plan.schedule) {
    w.begin_object();
    w.key("yaw_deg").value(e.yaw_deg);
    w.key("pitch_deg").value(e.pitch_deg);
    w.key("instruction").value(e.instruction);
    w.end_object();
  }
  w.end_array();
  w.key("superres").value(cfg.plan.superres);
  w.key("seed_image").value(cfg.plan.seed_image);
  w.key("view_resolution").value(cfg.plan.view_resolution);
  w.key("pano_width").value(cfg.plan.pano_width);
  w.end_object();

  w.key("cameras");
  w.begin_object();
  w.key("count").value(cfg.cameras.count);
  w.key("fov_deg").value(cfg.cameras.fov_deg);
  w.key("resolution").value(cfg.cameras.resolution);
  w.key("offset_world").value(cfg.cameras.offset_world);
  w.key("offset_scale").value(cfg.cameras.offset_scale);
  w.end_object();

  w.key("moving").begin_array();
  for (const MovingSceneSpec& m : cfg.moving) {
    w.begin_object();
    w.key("initial_view").value(m.initial_view);
    w.key("sample_count").value(m.sample_count);
    w.key("trajectory").begin_array();
    for (const TrajectoryStep& t : m.trajectory) {
      w.begin_object();
      w.key("position").begin_array();
      for (int i = 0; i < 3; i++) {
        w.value(t.position(i));
      }
      w.end_array();
      w.key("yaw_deg").value(t.yaw_deg);
      w.key("pitch_deg").value(t.pitch_deg);
      w.end_object();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();

  w.key("generators").value(cfg.generators);
  w.key("timeout_s").value(cfg.timeout_s);
  w.key("stub_scene");
  w.begin_object();
  switch (cfg.stub_scene.mode) {
    case StubSceneConfig::Mode::kConstantDepth: w.key("mode").value("constant"); break;
    case StubSceneConfig::Mode::kSphereRoom: w.key("mode").value("sphere"); break;
    case StubSceneConfig::Mode::kBoxRoom: w.key("mode").value("box"); break;
  }
  w.key("depth").value(cfg.stub_scene.depth);
  w.end_object();
  w.key("seed").value(size_t(cfg.seed));
  w.key("stage_boundary").value(cfg.stage_boundary);
  w.key("splat");
  w.begin_object();
  w.key("alpha").value(cfg.splat.alpha);
  w.key("radius_multiplier").value(cfg.splat.radius_multiplier);
  w.key("knn").value(cfg.splat.knn);
  w.key("min_sigma").value(cfg.splat.min_sigma);
  w.end_object();
  w.end_object();
  return w.str();
}

GeneratorSuite make_suite_for(const PipelineConfig& config) {
  if (config.generators == "stub") {
    return make_stub_suite(config.stub_scene);
  }
  std::string url = config.generators;
  if (url.empty()) {
    const char* env = std::getenv(kEndpointEnvVar);
    if (env == nullptr || *env == '\0') {
      throw ParameterError("no generator endpoint configured and " + std::string(kEndpointEnvVar) +
                           " is unset");
    }
    url = env;
  }
  return make_remote_suite({url, config.timeout_s, config.seed});
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw Error("output directory is locked by another run (remove " + path_.string() +
                " if that run is gone)");
  }
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

StageRunner::StageRunner(StageContext& ctx, const std::string& stage) : ctx_(ctx), stage_(stage) {
  fs::create_directories(ctx_.root / "manifests");
  require_input(snapshot_config(ctx_));
}

std::string StageRunner::relative(const fs::path& file) const {
  return fs::relative(file, ctx_.root).generic_string();
}

void StageRunner::require_input(const fs::path& file) {
  if (!fs::exists(file)) {
    throw MissingInputError("stage '" + stage_ + "' requires missing artifact: " + file.string());
  }
  inputs_[relative(file)] = sha256_file_hex(file.string());
}

bool StageRunner::up_to_date() const {
  const fs::path manifest_path = ctx_.root / "manifests" / (stage_ + ".json");
  if (!fs::exists(manifest_path)) {
    return false;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (!j.contains("inputs") || !j.contains("outputs")) {
    return false;
  }
  std::map<std::string, std::string> recorded;
  for (const auto& [key, value] : j.at("inputs").items()) {
    recorded[key] = value.get<std::string>();
  }
  if (recorded != inputs_) {
    return false;
  }
  for (const auto& [key, value] : j.at("outputs").items()) {
    const fs::path file = ctx_.root / key;
    if (!fs::exists(file) || sha256_file_hex(file.string()) != value.get<std::string>()) {
      return false;
    }
  }
  return true;
}

void StageRunner::add_output(const fs::path& file) {
  outputs_.push_back(file);
}

void StageRunner::finish() {
  std::map<std::string, std::string> output_hashes;
  for (const fs::path& file : outputs_) {
    output_hashes[relative(file)] = sha256_file_hex(file.string());
  }
  JsonWriter w;
  w.begin_object();
  w.key("stage").value(stage_);
  w.key("inputs").begin_object();
  for (const auto& [key, value] : inputs_) {
    w.key(key).value(value);
  }
  w.end_object();
  w.key("outputs").begin_object();
  for (const auto& [key, value] : output_hashes) {
    w.key(key).value(value);
  }
  w.end_object();
  w.end_object();
  write_text_file(ctx_.root / "manifests" / (stage_ + ".json"), w.str());
}

void StageRunner::progress(const std::string& event) const {
  std::cerr << "[" << stage_ << "] " << event << "\n";
  if (ctx_.progress_json) {
    JsonWriter w;
    w.begin_object();
    w.key("stage").value(stage_);
    w.key("event").value(event);
    w.end_object();
    std::cout << w.str() << std::endl;
  }
}

void run_compose(StageContext& ctx) {
  StageRunner stage(ctx, "compose");
  std::optional<Image> seed;
  if (!ctx.config.plan.seed_image.empty()) {
    stage.require_input(ctx.config.plan.seed_image);
  }
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");
  if (!ctx.config.plan.seed_image.empty()) {
    seed = read_png(ctx.config.plan.seed_image);
  }

  const PanoramaResult result = run_panorama_loop(ctx.config.plan, ctx.suite, seed);

  const fs::path dir = stage.dir();
  fs::create_directories(dir / "views");

  write_png((dir / "pano.png").string(), result.pano.image);
  write_text_file(dir / "pano.json", equirect_sidecar_json(result.pano.width(), result.pano.height()));
  write_mask_png((dir / "pano_valid.png").string(), validity_as_mask(result.pano.image));
  write_png((dir / "pano_composed.png").string(), result.pano_composed.image);
  write_text_file(dir / "pano_composed.json",
                  equirect_sidecar_json(result.pano_composed.width(), result.pano_composed.height()));
  write_mask_png((dir / "pano_composed_valid.png").string(),
                 validity_as_mask(result.pano_composed.image));
  write_mask_png((dir / "pole_mask.png").string(), result.pole_mask);
  stage.add_output(dir / "pano.png");
  stage.add_output(dir / "pano.json");
  stage.add_output(dir / "pano_valid.png");
  stage.add_output(dir / "pano_composed.png");
  stage.add_output(dir / "pano_composed.json");
  stage.add_output(dir / "pano_composed_valid.png");
  stage.add_output(dir / "pole_mask.png");

  JsonWriter views;
  views.begin_object();
  const CameraIntrinsics& intr = result.views.front().intrinsics;
  views.key("fx").value(intr.fx);
  views.key("fy").value(intr.fy);
  views.key("cx").value(intr.cx);
  views.key("cy").value(intr.cy);
  views.key("width").value(intr.width);
  views.key("height").value(intr.height);
  views.key("views").begin_array();
  for (size_t i = 0; i < result.views.size(); i++) {
    const fs::path file = dir / "views" / (frame_name("view", int(i)) + ".png");
    write_png(file.string(), result.views[i].image);
    stage.add_output(file);
    views.begin_object();
    views.key("yaw_deg").value(ctx.config.plan.schedule[i].yaw_deg);
    views.key("pitch_deg").value(ctx.config.plan.schedule[i].pitch_deg);
    write_pose_fields(views, result.views[i].pose);
    views.end_object();
  }
  views.end_array();
  views.end_object();
  write_text_file(dir / "views.json", views.str());
  stage.add_output(dir / "views.json");

  stage.finish();
  stage.progress("done");
}

void run_lift(StageContext& ctx) {
  StageRunner stage(ctx, "lift");
  const fs::path compose = ctx.root / "compose";
  stage.require_input(compose / "pano.png");
  stage.require_input(compose / "pano_valid.png");
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");

  Image pano_img = read_png((compose / "pano.png").string());
  apply_mask_as_validity(pano_img,
                         read_mask_png((compose / "pano_valid.png").string(), MaskKind::kBounds));
  const EquirectImage pano(std::move(pano_img));

  const DepthMap depth = ctx.suite.depth_estimator->estimate(pano);
  const PointCloud cloud = lift_equirect(pano, depth);

  const fs::path dir = stage.dir();
  fs::create_directories(dir);
  write_pfm((dir / "pano_depth.pfm").string(), depth);
  write_ply((dir / "points.ply").string(), cloud);
  stage.add_output(dir / "pano_depth.pfm");
  stage.add_output(dir / "points.ply");
  stage.finish();
  stage.progress("done");
}

void run_supp(StageContext& ctx) {
  StageRunner stage(ctx, "supp");
  const fs::path compose = ctx.root / "compose";
  const fs::path lift = ctx.root / "lift";
  stage.require_input(compose / "pano.png");
  stage.require_input(compose / "pano_valid.png");
  stage.require_input(lift / "pano_depth.pfm");
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");

  Image pano_img = read_png((compose / "pano.png").string());
  apply_mask_as_validity(pano_img,
                         read_mask_png((compose / "pano_valid.png").string(), MaskKind::kBounds));
  const EquirectImage pano(std::move(pano_img));
  const DepthMap pano_depth = read_pfm((lift / "pano_depth.pfm").string());

  const CameraParams& params = ctx.config.cameras;
  CameraSet set = build_base_cameras(params.count, params.fov_deg, params.resolution,
                                     Eigen::Vector3d::Zero());
  const double offset = params.offset_world > 0.0
                            ? params.offset_world
                            : params.offset_scale * median_valid_depth(pano_depth);
  set = build_supplementary_cameras(set, offset);

  const fs::path dir = stage.dir();
  fs::create_directories(dir);
  write_text_file(dir / "cameras.json", camera_set_to_json(set));
  stage.add_output(dir / "cameras.json");

  std::vector<PerspectiveImage> base_images(set.base.size());
  std::vector<DepthMap> base_depths(set.base.size());
  for (size_t i = 0; i < set.base.size(); i++) {
    const Camera& cam = set.base[i];
    base_images[i] = equirect_to_perspective(pano, cam.pose, cam.intrinsics);
    quantize_to_8bit(base_images[i].image);
    base_depths[i] = equirect_depth_to_perspective(pano_depth, cam.pose, cam.intrinsics);

    const fs::path img_path = dir / (camera_name("base", int(i)) + ".png");
    const fs::path depth_path = dir / (camera_name("base_depth", int(i)) + ".pfm");
    write_png(img_path.string(), base_images[i].image);
    write_pfm(depth_path.string(), base_depths[i]);
    stage.add_output(img_path);
    stage.add_output(depth_path);
  }

  for (size_t j = 0; j < set.supplementary.size(); j++) {
    const SupplementaryCamera& supp = set.supplementary[j];
    const Camera& base = set.base[supp.base_index];
    const Pose relative = pose_compose(supp.pose, pose_inverse(base.pose));
    WarpRefineResult refined;
    try {
      refined = ctx.suite.warp_refiner->refine(base_images[supp.base_index],
                                               base_depths[supp.base_index], relative,
                                               supp.intrinsics);
    } catch (const TransportError& e) {
      throw TransportError("supplementary view " + std::to_string(j) + ": " + e.what());
    }

    const fs::path img_path = dir / (camera_name("supp", int(j)) + ".png");
    const fs::path mask_path = dir / (camera_name("supp_mask", int(j)) + ".png");
    write_png(img_path.string(), refined.image.image);
    write_mask_png(mask_path.string(), refined.occlusion);
    stage.add_output(img_path);
    stage.add_output(mask_path);
  }

  stage.finish();
  stage.progress("done");
}

void run_move(StageContext& ctx) {
  StageRunner stage(ctx, "move");
  const fs::path compose = ctx.root / "compose";
  stage.require_input(compose / "views.json");
  const ViewsFile views = read_views_file(compose / "views.json");
  for (const MovingSceneSpec& spec : ctx.config.moving) {
    if (spec.initial_view < 0 || spec.initial_view >= int(views.poses.size())) {
      throw ParameterError("moving scene initial_view out of range");
    }
    stage.require_input(compose / "views" / (frame_name("view", spec.initial_view) + ".png"));
  }
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");

  const fs::path dir = stage.dir();
  for (size_t s = 0; s < ctx.config.moving.size(); s++) {
    const MovingSceneSpec& spec = ctx.config.moving[s];
    PerspectiveImage initial;
    initial.image =
        read_png((compose / "views" / (frame_name("view", spec.initial_view) + ".png")).string());
    initial.intrinsics = views.intrinsics;
    initial.pose = views.poses[spec.initial_view];

    std::vector<Pose> trajectory;
    trajectory.push_back(initial.pose);
    for (const TrajectoryStep& step : spec.trajectory) {
      trajectory.push_back(
          look_at_pose(step.position, step.yaw_deg * kPi / 180.0, step.pitch_deg * kPi / 180.0));
    }

    SynthesizedViews synth;
    try {
      synth = ctx.suite.view_synthesizer->synthesize(initial, trajectory, int(trajectory.size()));
    } catch (const TransportError& e) {
      throw TransportError("moving scene " + std::to_string(s) + ": " + e.what());
    }

    // Uniform sample of n frames, always keeping the first (the overlap
    // anchor) and, for n > 1, the last.
    const int m = int(synth.frames.size());
    const int n = std::min(std::max(1, spec.sample_count), m);
    std::vector<int> indices;
    if (n == 1) {
      indices.push_back(0);
    } else {
      for (int k = 0; k < n; k++) {
        indices.push_back(int(std::llround(double(k) * (m - 1) / (n - 1))));
      }
      indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    }

    const fs::path scene_dir = dir / scene_dir_name(int(s));
    fs::create_directories(scene_dir);

    JsonWriter poses;
    poses.begin_object();
    poses.key("fx").value(views.intrinsics.fx);
    poses.key("fy").value(views.intrinsics.fy);
    poses.key("cx").value(views.intrinsics.cx);
    poses.key("cy").value(views.intrinsics.cy);
    poses.key("width").value(views.intrinsics.width);
    poses.key("height").value(views.intrinsics.height);
    poses.key("frames").begin_array();
    for (size_t k = 0; k < indices.size(); k++) {
      const int src = indices[k];
      const fs::path frame_path = scene_dir / (frame_name("frame", int(k)) + ".png");
      const fs::path depth_path = scene_dir / (frame_name("depth", int(k)) + ".pfm");
      write_png(frame_path.string(), synth.frames[src]);
      write_pfm(depth_path.string(), synth.depths[src]);
      stage.add_output(frame_path);
      stage.add_output(depth_path);
      poses.begin_object();
      poses.key("index").value(src);
      write_pose_fields(poses, synth.poses[src]);
      poses.end_object();
    }
    poses.end_array();
    poses.end_object();
    write_text_file(scene_dir / "poses.json", poses.str());
    stage.add_output(scene_dir / "poses.json");
  }

  stage.finish();
  stage.progress("done");
}

void run_align(StageContext& ctx) {
  StageRunner stage(ctx, "align");
  const fs::path lift = ctx.root / "lift";
  const fs::path move = ctx.root / "move";
  stage.require_input(lift / "pano_depth.pfm");
  std::vector<ScenePosesFile> scene_poses;
  for (size_t s = 0; s < ctx.config.moving.size(); s++) {
    const fs::path scene_dir = move / scene_dir_name(int(s));
    stage.require_input(scene_dir / "poses.json");
    scene_poses.push_back(read_scene_poses(scene_dir / "poses.json"));
    for (size_t k = 0; k < scene_poses.back().poses.size(); k++) {
      stage.require_input(scene_dir / (frame_name("depth", int(k)) + ".pfm"));
    }
  }
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");

  const DepthMap pano_depth = read_pfm((lift / "pano_depth.pfm").string());

  for (size_t s = 0; s < ctx.config.moving.size(); s++) {
    const fs::path scene_dir = move / scene_dir_name(int(s));
    const ScenePosesFile& poses = scene_poses[s];

    std::vector<DepthMap> frame_depths;
    for (size_t k = 0; k < poses.poses.size(); k++) {
      frame_depths.push_back(read_pfm((scene_dir / (frame_name("depth", int(k)) + ".pfm")).string()));
    }

    const DepthMap& d = frame_depths.front();
    const DepthMap d_p = equirect_depth_to_perspective(pano_depth, poses.poses.front(),
                                                       poses.intrinsics);
    ViewMask overlap(d.width, d.height, MaskKind::kOverlap);
    for (size_t i = 0; i < overlap.bits.size(); i++) {
      overlap.bits[i] = d.valid[i] && d_p.valid[i];
    }

    const AlignmentSolution sol = solve_disparity_alignment(d, d_p, overlap);
    const DepthMap rectified = rectify_depth(d_p, sol);
    const DepthMap smoothed = smooth_mask_edges(rectified, overlap);
    double gamma = 1.0;
    const std::vector<DepthMap> scaled =
        scale_factor_and_propagate(d, rectified, frame_depths, &gamma);

    const fs::path out_dir = stage.dir() / scene_dir_name(int(s));
    fs::create_directories(out_dir);
    write_text_file(out_dir / "alignment.json", alignment_to_json(sol));
    stage.add_output(out_dir / "alignment.json");
    write_pfm((out_dir / "depth_rect.pfm").string(), smoothed);
    stage.add_output(out_dir / "depth_rect.pfm");
    for (size_t k = 0; k < scaled.size(); k++) {
      const fs::path path = out_dir / (frame_name("depth", int(k)) + ".pfm");
      write_pfm(path.string(), scaled[k]);
      stage.add_output(path);
    }
  }

  stage.finish();
  stage.progress("done");
}

void run_fuse(StageContext& ctx) {
  StageRunner stage(ctx, "fuse");
  const fs::path lift = ctx.root / "lift";
  const fs::path move = ctx.root / "move";
  const fs::path align = ctx.root / "align";
  stage.require_input(lift / "points.ply");
  std::vector<ScenePosesFile> scene_poses;
  for (size_t s = 0; s < ctx.config.moving.size(); s++) {
    const fs::path scene_dir = move / scene_dir_name(int(s));
    stage.require_input(scene_dir / "poses.json");
    scene_poses.push_back(read_scene_poses(scene_dir / "poses.json"));
    for (size_t k = 0; k < scene_poses.back().poses.size(); k++) {
      stage.require_input(scene_dir / (frame_name("frame", int(k)) + ".png"));
      stage.require_input(align / scene_dir_name(int(s)) / (frame_name("depth", int(k)) + ".pfm"));
    }
  }
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");

  const PointCloud pano_cloud = read_ply((lift / "points.ply").string());

  std::vector<PointCloud> moving_clouds;
  for (size_t s = 0; s < ctx.config.moving.size(); s++) {
    const ScenePosesFile& poses = scene_poses[s];
    const fs::path scene_dir = move / scene_dir_name(int(s));
    const fs::path align_dir = align / scene_dir_name(int(s));

    PointCloud scene_cloud;
    const SourceTag tag{SourceKind::kMoving, int(s)};
    for (size_t k = 0; k < poses.poses.size(); k++) {
      const Image frame = read_png((scene_dir / (frame_name("frame", int(k)) + ".png")).string());
      const DepthMap depth = read_pfm((align_dir / (frame_name("depth", int(k)) + ".pfm")).string());
      const PointCloud lifted =
          lift_perspective(frame, depth, poses.poses[k], poses.intrinsics, tag);
      scene_cloud = fuse(scene_cloud, {lifted});
    }
    moving_clouds.push_back(
        filter_moving_scene(scene_cloud, poses.poses.front(), poses.intrinsics));
  }

  const PointCloud fused = fuse(pano_cloud, moving_clouds);
  const fs::path dir = stage.dir();
  fs::create_directories(dir);
  write_ply((dir / "fused.ply").string(), fused);
  stage.add_output(dir / "fused.ply");
  stage.finish();
  stage.progress("done");
}

void run_render(StageContext& ctx) {
  StageRunner stage(ctx, "render");
  const fs::path fuse_dir = ctx.root / "fuse";
  const fs::path supp = ctx.root / "supp";
  stage.require_input(fuse_dir / "fused.ply");
  stage.require_input(supp / "cameras.json");
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");

  const PointCloud cloud = read_ply((fuse_dir / "fused.ply").string());
  const CameraSet cameras = camera_set_from_json(read_text_file(supp / "cameras.json"));
  const GaussianSet gaussians = pointcloud_to_gaussians(cloud, ctx.config.splat);

  const fs::path dir = stage.dir();
  fs::create_directories(dir);
  for (size_t i = 0; i < cameras.base.size(); i++) {
    const RenderResult result =
        render(gaussians, cameras.base[i].pose, cameras.base[i].intrinsics);
    const fs::path img_path = dir / (camera_name("render", int(i)) + ".png");
    const fs::path depth_path = dir / (camera_name("depth", int(i)) + ".pfm");
    write_png(img_path.string(), result.image.image);
    write_pfm(depth_path.string(), result.depth);
    stage.add_output(img_path);
    stage.add_output(depth_path);
  }
  stage.finish();
  stage.progress("done");
}

void run_export(StageContext& ctx) {
  StageRunner stage(ctx, "export");
  const fs::path supp = ctx.root / "supp";
  const fs::path move = ctx.root / "move";
  const fs::path fuse_dir = ctx.root / "fuse";
  stage.require_input(supp / "cameras.json");
  stage.require_input(fuse_dir / "fused.ply");
  const CameraSet cameras = camera_set_from_json(read_text_file(supp / "cameras.json"));
  for (size_t i = 0; i < cameras.base.size(); i++) {
    stage.require_input(supp / (camera_name("base", int(i)) + ".png"));
  }
  for (size_t j = 0; j < cameras.supplementary.size(); j++) {
    stage.require_input(supp / (camera_name("supp", int(j)) + ".png"));
    stage.require_input(supp / (camera_name("supp_mask", int(j)) + ".png"));
  }
  std::vector<ScenePosesFile> scene_poses;
  for (size_t s = 0; s < ctx.config.moving.size(); s++) {
    const fs::path scene_dir = move / scene_dir_name(int(s));
    stage.require_input(scene_dir / "poses.json");
    scene_poses.push_back(read_scene_poses(scene_dir / "poses.json"));
    for (size_t k = 0; k < scene_poses.back().poses.size(); k++) {
      stage.require_input(scene_dir / (frame_name("frame", int(k)) + ".png"));
    }
  }
  if (stage.up_to_date()) {
    stage.progress("skipped");
    return;
  }
  stage.progress("start");

  TrainingBundle bundle;
  bundle.cameras = cameras;
  bundle.stage_boundary = ctx.config.stage_boundary;
  for (size_t i = 0; i < cameras.base.size(); i++) {
    bundle.base_images.push_back(read_png((supp / (camera_name("base", int(i)) + ".png")).string()));
  }
  for (size_t j = 0; j < cameras.supplementary.size(); j++) {
    bundle.supp_images.push_back(read_png((supp / (camera_name("supp", int(j)) + ".png")).string()));
    bundle.supp_masks.push_back(read_mask_png(
        (supp / (camera_name("supp_mask", int(j)) + ".png")).string(), MaskKind::kOcclusion));
  }
  for (size_t s = 0; s < scene_poses.size(); s++) {
    const fs::path scene_dir = move / scene_dir_name(int(s));
    for (size_t k = 0; k < scene_poses[s].poses.size(); k++) {
      bundle.moving_cameras.push_back({scene_poses[s].poses[k], scene_poses[s].intrinsics});
      bundle.moving_images.push_back(
          read_png((scene_dir / (frame_name("frame", int(k)) + ".png")).string()));
    }
  }
  bundle.cloud = read_ply((fuse_dir / "fused.ply").string());

  const fs::path dir = stage.dir();
  export_training_bundle(dir.string(), bundle);

  stage.add_output(dir / "cameras.json");
  stage.add_output(dir / "points.ply");
  stage.add_output(dir / "manifest.json");
  for (size_t i = 0; i < bundle.base_images.size(); i++) {
    stage.add_output(dir / "images" / (camera_name("base", int(i)) + ".png"));
  }
  for (size_t i = 0; i < bundle.moving_images.size(); i++) {
    stage.add_output(dir / "images" / (camera_name("moving", int(i)) + ".png"));
  }
  for (size_t i = 0; i < bundle.supp_images.size(); i++) {
    stage.add_output(dir / "images" / (camera_name("supp", int(i)) + ".png"));
    stage.add_output(dir / "masks" / (camera_name("supp", int(i)) + ".png"));
  }
  stage.finish();
  stage.progress("done");
}

void run_all(StageContext& ctx) {
  run_compose(ctx);
  run_lift(ctx);
  run_supp(ctx);
  run_move(ctx);
  run_align(ctx);
  run_fuse(ctx);
  run_render(ctx);
  run_export(ctx);
}

}  // namespace panoscene
