#include "panoscene/projection.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "panoscene/errors.hpp"
#include "test_util.hpp"

using namespace panoscene;

namespace {

constexpr double kPi = std::numbers::pi;

Image random_image(int w, int h, uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> level(0, 255);
  Image img(w, h);
  for (float& v : img.pixels) {
    v = level(rng) / 255.f;
  }
  return img;
}

/// Independent frustum test for a destination pixel of warp_rotate.
bool oracle_ray_in_source_frustum(int x, int y, const CameraIntrinsics& k,
                                  const Eigen::Matrix3d& rotation) {
  const Eigen::Vector3d dir((x + 0.5 - k.cx) / k.fx, (y + 0.5 - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d src = rotation.transpose() * dir;
  if (src.z() <= 0.0) {
    return false;
  }
  const double u = k.fx * src.x() / src.z() + k.cx;
  const double v = k.fy * src.y() / src.z() + k.cy;
  return u >= 0.0 && u < k.width && v >= 0.0 && v < k.height;
}

double mean_abs_diff_on_valid(const Image& a, const Image& b) {
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < a.pixel_count(); i++) {
    if (!a.valid[i] || !b.valid[i]) {
      continue;
    }
    for (int c = 0; c < 3; c++) {
      sum += std::abs(double(a.pixels[3 * i + c]) - double(b.pixels[3 * i + c]));
    }
    count += 3;
  }
  REQUIRE(count > 0);
  return sum / double(count);
}

}  // namespace

TEST_CASE("equirect direction: forced center and pole cases") {
  const int w = 1024, h = 512;
  const Eigen::Vector3d center = equirect_direction_continuous(w / 2 - 0.5, h / 2 - 0.5, w, h);
  CHECK((center - Eigen::Vector3d(0, 0, 1)).cwiseAbs().maxCoeff() < 1e-12);

  // Top-row midpoint points within one pixel's angle of the up pole (-y).
  const Eigen::Vector3d top = equirect_to_direction(w / 2, 0, w, h);
  const double angle_to_pole = std::acos(std::clamp(-top.y(), -1.0, 1.0));
  CHECK(angle_to_pole <= kPi / h + 1e-12);

  CHECK_THROWS_AS(equirect_to_direction(-1, 0, w, h), ParameterError);
  CHECK_THROWS_AS(equirect_to_direction(0, h, w, h), ParameterError);
  CHECK_THROWS_AS(equirect_to_direction(0, 0, w, h + 1), ParameterError);
}

TEST_CASE("equirect direction round trip within half a pixel") {
  const int w = 1024, h = 512;
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> ud(0, w - 1);
  std::uniform_int_distribution<int> vd(0, h - 1);
  for (int i = 0; i < 10000; i++) {
    const int u = ud(rng);
    const int v = vd(rng);
    const Eigen::Vector2d back = direction_to_equirect(equirect_to_direction(u, v, w, h), w, h);
    CHECK(std::abs(back.x() - u) < 0.5);
    CHECK(std::abs(back.y() - v) < 0.5);
  }
}

TEST_CASE("warp_rotate identity is bit-exact with an empty mask") {
  PerspectiveImage src;
  src.intrinsics = CameraIntrinsics::from_fov(100.0, 160, 160);
  src.image = random_image(160, 160, 42);
  const WarpResult out = warp_rotate(src, Eigen::Matrix3d::Identity());
  CHECK(out.image.image.pixels == src.image.pixels);
  CHECK(out.image.image.valid == src.image.valid);
  CHECK(out.inpaint_mask.popcount() == 0);
}

TEST_CASE("warp_rotate by a full FoV yaw leaves almost no overlap") {
  PerspectiveImage src;
  src.intrinsics = CameraIntrinsics::from_fov(100.0, 200, 200);
  src.image = random_image(200, 200, 1);
  const Eigen::Matrix3d yaw =
      Eigen::AngleAxisd(100.0 * kPi / 180.0, Eigen::Vector3d(0, -1, 0)).toRotationMatrix();
  const WarpResult out = warp_rotate(src, yaw);

  // Columns with any covered pixel.
  int covered_columns = 0;
  for (int x = 0; x < 200; x++) {
    bool any = false;
    for (int y = 0; y < 200; y++) {
      any = any || !out.inpaint_mask.at(x, y);
    }
    covered_columns += any ? 1 : 0;
  }
  CHECK(covered_columns <= 2);
  CHECK(out.inpaint_mask.popcount() > size_t(200 * 200 * 0.95));
}

TEST_CASE("warp_rotate mask complement equals the frustum oracle") {
  std::mt19937 rng(9);
  PerspectiveImage src;
  src.intrinsics = CameraIntrinsics::from_fov(80.0, 96, 96);
  src.image = random_image(96, 96, 2);
  for (int trial = 0; trial < 5; trial++) {
    std::uniform_real_distribution<double> angle(-1.2, 1.2);
    const Eigen::Matrix3d r =
        (Eigen::AngleAxisd(angle(rng), Eigen::Vector3d(0, -1, 0)) *
         Eigen::AngleAxisd(angle(rng) * 0.4, Eigen::Vector3d(1, 0, 0)))
            .toRotationMatrix();
    const WarpResult out = warp_rotate(src, r);
    for (int y = 0; y < 96; y++) {
      for (int x = 0; x < 96; x++) {
        CHECK(out.inpaint_mask.at(x, y) == !oracle_ray_in_source_frustum(x, y, src.intrinsics, r));
      }
    }
  }
}

TEST_CASE("warp there and back agrees on the doubly covered region") {
  PerspectiveImage src = test::analytic_sphere_view(Pose(), CameraIntrinsics::from_fov(90.0, 128, 128));
  const Eigen::Matrix3d r =
      Eigen::AngleAxisd(0.5, Eigen::Vector3d(0, -1, 0)).toRotationMatrix();
  const WarpResult there = warp_rotate(src, r);
  const WarpResult back = warp_rotate(there.image, r.transpose());

  double max_err = 0.0;
  for (size_t i = 0; i < src.image.pixel_count(); i++) {
    if (!back.image.image.valid[i]) {
      continue;
    }
    for (int c = 0; c < 3; c++) {
      max_err = std::max(max_err, std::abs(double(back.image.image.pixels[3 * i + c]) -
                                           double(src.image.pixels[3 * i + c])));
    }
  }
  CHECK(max_err <= 2.0 / 255.0);
}

TEST_CASE("single view solid angle matches the analytic frustum") {
  const CameraIntrinsics intr = CameraIntrinsics::from_fov(100.0, 256, 256);
  std::vector<PerspectiveImage> views;
  views.push_back(test::analytic_sphere_view(Pose(), intr));
  const EquirectImage pano = perspective_to_equirect(views, 2048);

  double covered = 0.0;
  const int w = pano.width(), h = pano.height();
  for (int v = 0; v < h; v++) {
    const double phi = (v + 0.5) / h * kPi;
    const double pixel_solid_angle = (2.0 * kPi / w) * (kPi / h) * std::sin(phi);
    for (int u = 0; u < w; u++) {
      if (pano.image.is_valid(u, v)) {
        covered += pixel_solid_angle;
      }
    }
  }
  // Solid angle of a square frustum with half-angle a: 4 asin(sin^2 a).
  const double half = 50.0 * kPi / 180.0;
  const double analytic = 4.0 * std::asin(std::sin(half) * std::sin(half));
  CHECK(std::abs(covered - analytic) / analytic < 0.01);
}

TEST_CASE("composition of many views reproduces the analytic panorama") {
  const CameraSet set = build_base_cameras(80, 60.0, 128, Eigen::Vector3d::Zero());
  std::vector<PerspectiveImage> views;
  views.reserve(set.base.size());
  for (const Camera& cam : set.base) {
    views.push_back(test::analytic_sphere_view(cam.pose, cam.intrinsics));
  }
  const EquirectImage pano = perspective_to_equirect(views, 512);

  Image reference(512, 256);
  for (int v = 0; v < 256; v++) {
    for (int u = 0; u < 512; u++) {
      const Eigen::Vector3f c = test::sphere_color(equirect_direction_continuous(u, v, 512, 256));
      float* p = reference.px(u, v);
      p[0] = c.x();
      p[1] = c.y();
      p[2] = c.z();
    }
  }
  CHECK(pano.image.valid == std::vector<uint8_t>(size_t(512) * 256, 1));
  CHECK(mean_abs_diff_on_valid(pano.image, reference) <= 2.0 / 255.0);

  // Constant-color views compose to the constant: blending weights sum to 1.
  std::vector<PerspectiveImage> flat = views;
  for (PerspectiveImage& view : flat) {
    for (size_t i = 0; i < view.image.pixels.size(); i++) {
      view.image.pixels[i] = 0.625f;
    }
  }
  const EquirectImage flat_pano = perspective_to_equirect(flat, 256);
  for (size_t i = 0; i < flat_pano.image.pixel_count(); i++) {
    if (flat_pano.image.valid[i]) {
      for (int c = 0; c < 3; c++) {
        CHECK(flat_pano.image.pixels[3 * i + c] == doctest::Approx(0.625f).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("perspective_to_equirect rejects views at different positions") {
  const CameraIntrinsics intr = CameraIntrinsics::from_fov(90.0, 32, 32);
  std::vector<PerspectiveImage> views(2);
  views[0].intrinsics = intr;
  views[0].image = Image(32, 32);
  views[0].pose = Pose();
  views[1] = views[0];
  views[1].pose = Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.1, 0, 0));
  CHECK_THROWS_AS(perspective_to_equirect(views, 128), ParameterError);
  CHECK_THROWS_AS(perspective_to_equirect({}, 128), ParameterError);
}

TEST_CASE("compose then extract recovers a contributing view") {
  const CameraSet set = build_base_cameras(12, 100.0, 128, Eigen::Vector3d::Zero());
  std::vector<PerspectiveImage> views;
  for (const Camera& cam : set.base) {
    views.push_back(test::analytic_sphere_view(cam.pose, cam.intrinsics));
  }
  const EquirectImage pano = perspective_to_equirect(views, 1024);
  const PerspectiveImage back =
      equirect_to_perspective(pano, set.base[3].pose, set.base[3].intrinsics);
  CHECK(mean_abs_diff_on_valid(back.image, views[3].image) <= 2.0 / 255.0);
}

TEST_CASE("equirect_to_perspective basics") {
  // 60 degree FoV at 512x512 extracted from a 512x1024 panorama.
  Image flat(1024, 512, 0.25f, 0.5f, 0.75f);
  const EquirectImage pano{std::move(flat)};
  const CameraIntrinsics intr = CameraIntrinsics::from_fov(60.0, 512, 512);
  const PerspectiveImage out = equirect_to_perspective(pano, Pose(), intr);
  CHECK(out.image.width == 512);
  CHECK(out.image.height == 512);
  for (size_t i = 0; i < out.image.pixel_count(); i++) {
    REQUIRE(out.image.valid[i] == 1);
    CHECK(out.image.pixels[3 * i] == doctest::Approx(0.25f).epsilon(1e-6));
    CHECK(out.image.pixels[3 * i + 2] == doctest::Approx(0.75f).epsilon(1e-6));
  }
}

TEST_CASE("pole completion mask matches the uncovered bands") {
  // Views covering about +-40 degrees of elevation on the equator only.
  std::vector<PerspectiveImage> views;
  const CameraIntrinsics intr = CameraIntrinsics::from_fov(80.0, 128, 128);
  for (int i = 0; i < 10; i++) {
    const Pose pose = look_at_pose(Eigen::Vector3d::Zero(), i * 36.0 * kPi / 180.0, 0.0);
    views.push_back(test::analytic_sphere_view(pose, intr));
  }
  const EquirectImage pano = perspective_to_equirect(views, 720);
  const ViewMask mask = pole_completion_mask(pano);

  size_t invalid = 0;
  for (uint8_t v : pano.image.valid) {
    invalid += v == 0;
  }
  CHECK(mask.popcount() == invalid);

  // Analytic coverage bounds for 10 cameras 36 degrees apart with a square
  // 80-degree frustum: everywhere within atan(tan(40) cos(18)) of the
  // equator is covered, nothing beyond 40 degrees is.
  const int h = pano.height();
  const int w = pano.width();
  const double covered_deg = std::atan(std::tan(40.0 * kPi / 180.0) * std::cos(18.0 * kPi / 180.0)) *
                             180.0 / kPi;
  const int row_lo = int(std::ceil((90.0 - covered_deg) / 180.0 * h)) + 2;
  const int row_hi = int(std::floor((90.0 + covered_deg) / 180.0 * h)) - 3;
  for (int v = row_lo; v <= row_hi; v++) {
    for (int u = 0; u < w; u++) {
      CHECK(!mask.at(u, v));
    }
  }
  const int top_band = int(std::floor((90.0 - 40.0) / 180.0 * h)) - 3;
  const int bottom_band = int(std::ceil((90.0 + 40.0) / 180.0 * h)) + 3;
  for (int v = 0; v <= top_band; v++) {
    for (int u = 0; u < w; u++) {
      CHECK(mask.at(u, v));
    }
  }
  for (int v = bottom_band; v < h; v++) {
    for (int u = 0; u < w; u++) {
      CHECK(mask.at(u, v));
    }
  }

  // A fully valid panorama yields an empty mask.
  Image full(64, 32, 0.f, 0.f, 0.f, true);
  CHECK(pole_completion_mask(EquirectImage(std::move(full))).popcount() == 0);
}

TEST_CASE("equirect sidecar JSON") {
  CHECK(equirect_sidecar_json(1024, 512) ==
        "{\"projection\":\"equirectangular\",\"width\":1024,\"height\":512}");
}
