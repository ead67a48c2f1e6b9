#include "panoscene/pipeline.hpp"

#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "panoscene/errors.hpp"
#include "panoscene/point_cloud.hpp"
#include "panoscene/sha256.hpp"

using namespace panoscene;
namespace fs = std::filesystem;

namespace {

std::string small_config_json() {
  return R"({
    "plan": {
      "prompt": "test scene",
      "fov_deg": 100.0,
      "view_resolution": 48,
      "schedule": [
        {"yaw_deg": 0.0}, {"yaw_deg": 60.0}, {"yaw_deg": 120.0}, {"yaw_deg": 180.0}
      ]
    },
    "cameras": {"count": 6, "fov_deg": 60.0, "resolution": 48, "offset_world": 0.05},
    "moving": [
      {"initial_view": 1, "sample_count": 2,
       "trajectory": [{"position": [0.4, 0.0, 0.2], "yaw_deg": 120.0},
                      {"position": [0.8, 0.0, 0.4], "yaw_deg": 180.0}]}
    ],
    "generators": "stub",
    "stub_scene": {"mode": "box", "depth": 2.0},
    "stage_boundary": 5000,
    "splat": {"alpha": 0.9, "radius_multiplier": 1.0}
  })";
}

StageContext make_context(const fs::path& root) {
  StageContext ctx;
  ctx.config = config_from_json(small_config_json());
  ctx.config.output_dir = root.string();
  ctx.root = root;
  ctx.suite = make_suite_for(ctx.config);
  return ctx;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config validation rejects violated stage preconditions up front") {
  CHECK_THROWS_AS(config_from_json(R"({"cameras": {"count": 0}})"), ParameterError);
  CHECK_THROWS_AS(config_from_json(R"({"cameras": {"fov_deg": 180.0}})"), ParameterError);
  CHECK_THROWS_AS(config_from_json(R"({"plan": {"schedule": []}})"), ParameterError);
  CHECK_THROWS_AS(config_from_json(R"({"moving": [{"initial_view": 99}]})"), ParameterError);
  CHECK_THROWS_AS(config_from_json(R"({"splat": {"alpha": 2.0}})"), ParameterError);
  CHECK_THROWS_AS(config_from_json(R"({"stub_scene": {"mode": "void"}})"), ParameterError);
}

TEST_CASE("config defaults mirror the reference setup") {
  const PipelineConfig cfg = config_from_json("{}");
  CHECK(cfg.cameras.count == 80);
  CHECK(cfg.cameras.fov_deg == 60.0);
  CHECK(cfg.cameras.resolution == 512);
  CHECK(cfg.stage_boundary == 5000);
  CHECK(cfg.generators == "stub");
  CHECK(cfg.plan.fov_deg == 100.0);
  CHECK(cfg.plan.schedule.size() == 8);

  // Canonical snapshot round-trips.
  const PipelineConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
}

TEST_CASE("full stage chain produces manifests and is idempotent") {
  const fs::path root = fs::temp_directory_path() / "panoscene_pipeline_test";
  fs::remove_all(root);
  StageContext ctx = make_context(root);

  run_all(ctx);

  const std::vector<std::string> stages = {"compose", "lift", "supp",   "move",
                                           "align",   "fuse", "render", "export"};
  for (const std::string& stage : stages) {
    CHECK(fs::exists(root / "manifests" / (stage + ".json")));
  }
  CHECK(fs::exists(root / "compose" / "pano.png"));
  CHECK(fs::exists(root / "compose" / "pano.json"));
  CHECK(fs::exists(root / "lift" / "points.ply"));
  CHECK(fs::exists(root / "supp" / "cameras.json"));
  CHECK(fs::exists(root / "move" / "scene_00" / "poses.json"));
  CHECK(fs::exists(root / "align" / "scene_00" / "alignment.json"));
  CHECK(fs::exists(root / "fuse" / "fused.ply"));
  CHECK(fs::exists(root / "render" / "render_0000.png"));
  CHECK(fs::exists(root / "export" / "manifest.json"));

  // 6 base cameras -> 24 supplementary images.
  CHECK(fs::exists(root / "supp" / "supp_0023.png"));
  CHECK(!fs::exists(root / "supp" / "supp_0024.png"));

  // Every stage manifest hash matches the artifact bytes on disk.
  for (const std::string& stage : stages) {
    const std::string manifest = file_bytes(root / "manifests" / (stage + ".json"));
    const nlohmann::json j = nlohmann::json::parse(manifest);
    for (const auto& [rel, hash] : j.at("outputs").items()) {
      CHECK(sha256_file_hex((root / rel).string()) == hash.get<std::string>());
    }
  }

  // Rerunning a stage with unchanged inputs is a no-op with an identical
  // manifest.
  const std::string lift_manifest = file_bytes(root / "manifests" / "lift.json");
  const auto lift_time = fs::last_write_time(root / "lift" / "points.ply");
  run_lift(ctx);
  CHECK(file_bytes(root / "manifests" / "lift.json") == lift_manifest);
  CHECK(fs::last_write_time(root / "lift" / "points.ply") == lift_time);

  // The fused cloud carries panorama and moving tags.
  const PointCloud fused = read_ply((root / "fuse" / "fused.ply").string());
  bool has_pano = false, has_moving = false;
  for (const SourceTag& t : fused.tags) {
    has_pano = has_pano || t.kind == SourceKind::kPanorama;
    has_moving = has_moving || t.kind == SourceKind::kMoving;
  }
  CHECK(has_pano);
  CHECK(has_moving);

  fs::remove_all(root);
}

TEST_CASE("stages demand their inputs") {
  const fs::path root = fs::temp_directory_path() / "panoscene_pipeline_missing";
  fs::remove_all(root);
  StageContext ctx = make_context(root);
  fs::create_directories(root);

  CHECK_THROWS_AS(run_render(ctx), MissingInputError);
  CHECK_THROWS_AS(run_lift(ctx), MissingInputError);
  try {
    run_fuse(ctx);
    FAIL("expected MissingInputError");
  } catch (const MissingInputError& e) {
    // The error names the missing artifact.
    CHECK(std::string(e.what()).find("points.ply") != std::string::npos);
  }
  fs::remove_all(root);
}

TEST_CASE("changing an input invalidates downstream stages") {
  const fs::path root = fs::temp_directory_path() / "panoscene_pipeline_invalidate";
  fs::remove_all(root);
  StageContext ctx = make_context(root);
  run_compose(ctx);
  run_lift(ctx);

  // Tamper with the panorama; lift must rerun (manifest changes).
  const std::string manifest_before = file_bytes(root / "manifests" / "lift.json");
  {
    std::ofstream out(root / "compose" / "pano.png", std::ios::binary | std::ios::app);
    out << "tamper";
  }
  run_lift(ctx);
  CHECK(file_bytes(root / "manifests" / "lift.json") != manifest_before);
  fs::remove_all(root);
}

TEST_CASE("directory lock excludes concurrent runs") {
  const fs::path root = fs::temp_directory_path() / "panoscene_lock_test";
  fs::remove_all(root);
  {
    DirectoryLock lock(root);
    CHECK_THROWS_AS([&] { DirectoryLock second(root); }(), Error);
  }
  // Released on destruction.
  CHECK_NOTHROW([&] { DirectoryLock again(root); }());
  fs::remove_all(root);
}

TEST_CASE("CLI binary: full run exits 0, missing input exits 2, bad config exits 5") {
  const fs::path root = fs::temp_directory_path() / "panoscene_cli_test";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config_path = root / "config.json";
  {
    std::ofstream out(config_path);
    out << small_config_json();
  }

  const std::string bin = PANOSCENE_BIN_PATH;

  const fs::path out_dir = root / "out";
  const int full = std::system(
      (bin + " run --config " + config_path.string() + " --out " + out_dir.string() +
       " --stub --threads 1 > /dev/null 2>&1")
          .c_str());
  CHECK(WEXITSTATUS(full) == 0);
  CHECK(fs::exists(out_dir / "export" / "manifest.json"));
  CHECK(!fs::exists(out_dir / ".lock"));  // released

  const fs::path fresh = root / "fresh";
  const int missing = std::system(
      (bin + " render --config " + config_path.string() + " --out " + fresh.string() +
       " --stub > /dev/null 2>&1")
          .c_str());
  CHECK(WEXITSTATUS(missing) == 2);

  const fs::path bad_config = root / "bad.json";
  {
    std::ofstream out(bad_config);
    out << "{ not json";
  }
  const int bad = std::system(
      (bin + " run --config " + bad_config.string() + " --out " + (root / "bad_out").string() +
       " > /dev/null 2>&1")
          .c_str());
  CHECK(WEXITSTATUS(bad) == 5);

  // A dead endpoint surfaces as a transport failure.
  const int transport = std::system(
      (bin + " compose --config " + config_path.string() + " --out " +
       (root / "transport_out").string() + " --endpoint http://127.0.0.1:9 --timeout 0.2" +
       " > /dev/null 2>&1")
          .c_str());
  CHECK(WEXITSTATUS(transport) == 3);

  // Progress JSON lines appear on stdout when requested.
  const fs::path progress_file = root / "progress.txt";
  const int progress = std::system(
      (bin + " compose --config " + config_path.string() + " --out " +
       (root / "progress_out").string() + " --stub --progress-json 2> /dev/null > " +
       progress_file.string())
          .c_str());
  CHECK(WEXITSTATUS(progress) == 0);
  const std::string progress_log = file_bytes(progress_file);
  CHECK(progress_log.find("{\"stage\":\"compose\",\"event\":\"start\"}") != std::string::npos);
  CHECK(progress_log.find("\"event\":\"done\"") != std::string::npos);

  fs::remove_all(root);
}

TEST_CASE("endpoint environment variable backs an empty generators field") {
  PipelineConfig cfg = config_from_json("{}");
  cfg.generators = "";
  ::setenv("PANOSCENE_ENDPOINT", "http://127.0.0.1:19999", 1);
  const GeneratorSuite suite = make_suite_for(cfg);
  CHECK(suite.kind == BackendKind::kRemote);
  ::unsetenv("PANOSCENE_ENDPOINT");
  CHECK_THROWS_AS(make_suite_for(cfg), ParameterError);
}
