#include "panoscene/panorama.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "panoscene/errors.hpp"
#include "panoscene/json_writer.hpp"
#include "panoscene/projection.hpp"

namespace panoscene {

namespace {

constexpr double kPi = std::numbers::pi;

Pose schedule_pose(const ScheduleEntry& entry) {
  return look_at_pose(Eigen::Vector3d::Zero(), entry.yaw_deg * kPi / 180.0,
                      entry.pitch_deg * kPi / 180.0);
}

template <typename ErrorType>
[[noreturn]] void rethrow_at_view(size_t view, const ErrorType& e) {
  throw ErrorType("view " + std::to_string(view) + ": " + e.what());
}

}  // namespace

PanoramaPlan default_panorama_plan() {
  PanoramaPlan plan;
  for (int i = 0; i < 6; i++) {
    plan.schedule.push_back({60.0 * i, 0.0, ""});
  }
  plan.schedule.push_back({0.0, 45.0, ""});
  plan.schedule.push_back({0.0, -45.0, ""});
  return plan;
}

std::string plan_to_json(const PanoramaPlan& plan) {
  JsonWriter w;
  w.begin_object();
  w.key("prompt").value(plan.prompt);
  w.key("fov_deg").value(plan.fov_deg);
  w.key("schedule").begin_array();
  for (const ScheduleEntry& e : plan.schedule) {
    w.begin_object();
    w.key("yaw_deg").value(e.yaw_deg);
    w.key("pitch_deg").value(e.pitch_deg);
    w.key("instruction").value(e.instruction);
    w.end_object();
  }
  w.end_array();
  w.key("superres").value(plan.superres);
  if (!plan.seed_image.empty()) {
    w.key("seed_image").value(plan.seed_image);
  }
  w.key("view_resolution").value(plan.view_resolution);
  if (plan.pano_width > 0) {
    w.key("pano_width").value(plan.pano_width);
  }
  w.end_object();
  return w.str();
}

PanoramaPlan plan_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("plan JSON parse error: ") + e.what());
  }

  PanoramaPlan plan;
  plan.prompt = j.value("prompt", std::string());
  plan.fov_deg = j.value("fov_deg", 100.0);
  plan.superres = j.value("superres", false);
  plan.seed_image = j.value("seed_image", std::string());
  plan.view_resolution = j.value("view_resolution", 512);
  plan.pano_width = j.value("pano_width", 0);
  if (j.contains("schedule")) {
    for (const auto& e : j.at("schedule")) {
      plan.schedule.push_back({e.value("yaw_deg", 0.0), e.value("pitch_deg", 0.0),
                               e.value("instruction", std::string())});
    }
  } else {
    plan.schedule = default_panorama_plan().schedule;
  }
  return plan;
}

void validate_plan(const PanoramaPlan& plan) {
  if (plan.schedule.empty()) {
    throw ParameterError("panorama plan: schedule must be non-empty");
  }
  if (!(plan.fov_deg > 0.0) || !(plan.fov_deg < 180.0)) {
    throw ParameterError("panorama plan: fov_deg must be in (0, 180)");
  }
  if (plan.view_resolution < 2) {
    throw ParameterError("panorama plan: view resolution too small");
  }
  if (plan.pano_width != 0 && (plan.pano_width < 2 || plan.pano_width % 2 != 0)) {
    throw ParameterError("panorama plan: pano_width must be even");
  }
  const double fov_rad = plan.fov_deg * kPi / 180.0;
  for (size_t i = 1; i < plan.schedule.size(); i++) {
    const Eigen::Vector3d a = schedule_pose(plan.schedule[i - 1]).forward_axis();
    const Eigen::Vector3d b = schedule_pose(plan.schedule[i]).forward_axis();
    const double angle = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
    if (angle >= fov_rad) {
      throw ParameterError("panorama plan: views " + std::to_string(i - 1) + " and " +
                           std::to_string(i) + " do not overlap");
    }
  }
}

bool verify_inpaint_contract(const PerspectiveImage& before, const PerspectiveImage& after,
                             const ViewMask& mask) {
  if (before.image.width != after.image.width || before.image.height != after.image.height ||
      mask.width != before.image.width || mask.height != before.image.height) {
    throw ParameterError("verify_inpaint_contract: dimension mismatch");
  }
  const size_t total = before.image.pixel_count();
  for (size_t i = 0; i < total; i++) {
    if (mask.bits[i]) {
      continue;
    }
    for (int c = 0; c < 3; c++) {
      if (before.image.pixels[3 * i + c] != after.image.pixels[3 * i + c]) {
        return false;
      }
    }
  }
  return true;
}

PanoramaResult run_panorama_loop(const PanoramaPlan& plan, const GeneratorSuite& gen,
                                 const std::optional<Image>& seed) {
  validate_plan(plan);
  validate_suite(gen);
  const int res = plan.view_resolution;
  const CameraIntrinsics intr = CameraIntrinsics::from_fov(plan.fov_deg, res, res);
  const int pano_width = plan.pano_width > 0 ? plan.pano_width : 2 * res;

  PanoramaResult result;
  result.views.reserve(plan.schedule.size());

  for (size_t i = 0; i < plan.schedule.size(); i++) {
    const ScheduleEntry& entry = plan.schedule[i];
    const Pose pose = schedule_pose(entry);
    const std::string& instruction = entry.instruction.empty() ? plan.prompt : entry.instruction;

    PerspectiveImage warped;
    ViewMask mask(res, res, MaskKind::kInpaintRegion, true);
    if (i == 0) {
      if (seed.has_value()) {
        if (seed->width != res || seed->height != res) {
          throw ParameterError("seed image must match the view resolution");
        }
        warped.image = *seed;
        mask = ViewMask(res, res, MaskKind::kInpaintRegion, false);
        for (int y = 0; y < res; y++) {
          for (int x = 0; x < res; x++) {
            mask.set(x, y, !seed->is_valid(x, y));
          }
        }
      } else {
        // No seed: the first view is synthesized from scratch, i.e. the
        // inpaint region is the whole frame.
        warped.image = Image(res, res, 0.f, 0.f, 0.f, false);
      }
      warped.intrinsics = intr;
      warped.pose = pose;
    } else {
      const PerspectiveImage& prev = result.views.back();
      const Eigen::Matrix3d relative = pose.rotation() * prev.pose.rotation().transpose();
      WarpResult w = warp_rotate(prev, relative);
      warped = std::move(w.image);
      mask = std::move(w.inpaint_mask);
    }

    // Plugins trade in 8-bit images; snap so the contract check is exact.
    quantize_to_8bit(warped.image);

    PerspectiveImage inpainted;
    try {
      inpainted = gen.inpainter->inpaint(warped, mask, instruction);
    } catch (const TransportError& e) {
      rethrow_at_view(i, e);
    } catch (const ParameterError& e) {
      rethrow_at_view(i, e);
    }
    if (!verify_inpaint_contract(warped, inpainted, mask)) {
      throw ContractViolationError("inpaint plugin changed pixels outside the mask at view " +
                                   std::to_string(i));
    }

    if (plan.superres) {
      Image hr;
      try {
        hr = gen.super_resolver->upscale(inpainted.image);
      } catch (const TransportError& e) {
        rethrow_at_view(i, e);
      }
      if (hr.width != 4 * res || hr.height != 4 * res) {
        throw ContractViolationError("super-resolution plugin must upscale 4x at view " +
                                     std::to_string(i));
      }
      inpainted.image = area_downsample(hr, 4);
    }

    inpainted.intrinsics = intr;
    inpainted.pose = pose;
    result.views.push_back(std::move(inpainted));
  }

  result.pano_composed = perspective_to_equirect(result.views, pano_width);
  result.pole_mask = pole_completion_mask(result.pano_composed);

  EquirectImage quantized = result.pano_composed;
  quantize_to_8bit(quantized.image);
  EquirectImage filled;
  try {
    filled = gen.pano_inpainter->inpaint(quantized, result.pole_mask);
  } catch (const TransportError& e) {
    throw TransportError(std::string("panorama inpaint: ") + e.what());
  }
  if (filled.width() != quantized.width() || filled.height() != quantized.height()) {
    throw ContractViolationError("panorama inpaint plugin changed dimensions");
  }
  for (size_t i = 0; i < quantized.image.pixel_count(); i++) {
    if (result.pole_mask.bits[i]) {
      continue;
    }
    for (int c = 0; c < 3; c++) {
      if (filled.image.pixels[3 * i + c] != quantized.image.pixels[3 * i + c]) {
        throw ContractViolationError("panorama inpaint plugin changed pixels outside the mask");
      }
    }
  }
  result.pano = std::move(filled);
  return result;
}

}  // namespace panoscene
