#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "panoscene/errors.hpp"
#include "panoscene/parallel.hpp"
#include "panoscene/pipeline.hpp"

namespace {

constexpr int kExitMissingInput = 2;
constexpr int kExitTransport = 3;
constexpr int kExitContract = 4;
constexpr int kExitParameter = 5;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string endpoint;
  bool stub = false;
  bool progress_json = false;
  int threads = 1;
  double timeout_s = 0.0;
};

using StageFn = std::function<void(panoscene::StageContext&)>;

int run_stage(const Options& opt, const StageFn& fn) {
  using namespace panoscene;

  PipelineConfig config = config_from_file(opt.config_path);
  if (!opt.out_dir.empty()) {
    config.output_dir = opt.out_dir;
  }
  if (opt.stub) {
    config.generators = "stub";
  } else if (!opt.endpoint.empty()) {
    config.generators = opt.endpoint;
  } else if (config.generators.empty()) {
    const char* env = std::getenv(kEndpointEnvVar);
    if (env != nullptr && *env != '\0') {
      config.generators = env;
    }
  }
  if (opt.timeout_s > 0.0) {
    config.timeout_s = opt.timeout_s;
  }

  set_thread_count(opt.threads);

  StageContext ctx;
  ctx.config = config;
  ctx.root = config.output_dir;
  ctx.progress_json = opt.progress_json;
  ctx.suite = make_suite_for(config);

  DirectoryLock lock(ctx.root);
  fn(ctx);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panoscene: text/image-to-360 scene geometry pipeline"};
  app.require_subcommand(1);

  Options opt;

  const std::map<std::string, std::pair<std::string, StageFn>> stages = {
      {"run", {"run every stage in order", panoscene::run_all}},
      {"compose", {"panorama warp-and-inpaint loop", panoscene::run_compose}},
      {"lift", {"panorama depth and point cloud", panoscene::run_lift}},
      {"supp", {"base/supplementary cameras and refined views", panoscene::run_supp}},
      {"move", {"moving-scene view synthesis", panoscene::run_move}},
      {"align", {"disparity alignment of moving scenes", panoscene::run_align}},
      {"fuse", {"global point cloud fusion", panoscene::run_fuse}},
      {"render", {"forward splat rendering of base views", panoscene::run_render}},
      {"export", {"training bundle export", panoscene::run_export}},
  };

  StageFn selected;
  for (const auto& [name, stage] : stages) {
    CLI::App* sub = app.add_subcommand(name, stage.first);
    sub->add_option("--config", opt.config_path, "pipeline config JSON")->required();
    sub->add_option("--out", opt.out_dir, "output directory (overrides config)");
    sub->add_option("--endpoint", opt.endpoint, "generator endpoint base URL");
    sub->add_flag("--stub", opt.stub, "use the deterministic stub generators");
    sub->add_flag("--progress-json", opt.progress_json, "emit progress JSON lines on stdout");
    sub->add_option("--timeout", opt.timeout_s, "per-call plugin timeout in seconds");
    sub->add_option("--threads", opt.threads, "worker threads for pixel loops")
        ->capture_default_str();
    const StageFn fn = stage.second;
    sub->callback([&selected, fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParameter;
  }

  try {
    return run_stage(opt, selected);
  } catch (const panoscene::MissingInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const panoscene::TransportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const panoscene::ContractViolationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const panoscene::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParameter;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
