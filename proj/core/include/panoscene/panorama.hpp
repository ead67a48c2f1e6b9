#pragma once

#include <optional>
#include <string>
#include <vector>

#include "panoscene/camera.hpp"
#include "panoscene/generators.hpp"
#include "panoscene/image.hpp"

namespace panoscene {

struct ScheduleEntry {
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  std::string instruction;
};

/// Plan for the warp-and-inpaint view loop. Orientations are absolute
/// (relative to the forward axis); consecutive entries must overlap.
struct PanoramaPlan {
  std::string prompt;
  std::string seed_image;  // optional path; empty = synthesize the first view
  std::vector<ScheduleEntry> schedule;
  double fov_deg = 100.0;
  bool superres = false;
  int view_resolution = 512;
  int pano_width = 0;  // 0 = twice the view resolution
};

/// Six 60-degree yaw steps around the equator, then pitch +45 and -45.
PanoramaPlan default_panorama_plan();

std::string plan_to_json(const PanoramaPlan& plan);
PanoramaPlan plan_from_json(const std::string& text);

/// Throws ParameterError on an empty schedule, a bad FoV, or consecutive
/// views whose axes diverge by more than the FoV (no overlap).
void validate_plan(const PanoramaPlan& plan);

struct PanoramaResult {
  EquirectImage pano;           // after pole completion
  EquirectImage pano_composed;  // straight from view composition
  ViewMask pole_mask;
  std::vector<PerspectiveImage> views;
};

/// The warp -> inpaint -> (super-resolve) loop over the plan's schedule,
/// followed by equirect composition and pole inpainting. Images are snapped
/// to the 8-bit grid before every plugin call so the unchanged-outside-mask
/// contract is exact; any violation raises ContractViolationError naming the
/// view. With stub generators the whole loop is deterministic.
PanoramaResult run_panorama_loop(const PanoramaPlan& plan, const GeneratorSuite& gen,
                                 const std::optional<Image>& seed = std::nullopt);

/// True iff `after` equals `before` exactly on every pixel outside `mask`.
bool verify_inpaint_contract(const PerspectiveImage& before, const PerspectiveImage& after,
                             const ViewMask& mask);

}  // namespace panoscene
