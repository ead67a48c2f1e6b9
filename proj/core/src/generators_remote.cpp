#include "panoscene/generators.hpp"

#include <chrono>
#include <cmath>
#include <mutex>

// Eigen (pulled in above) must precede httplib; httplib's platform headers
// leak macros that mangle Eigen templates.
#include <httplib.h>
#include <json.hpp>

#include "panoscene/base64.hpp"
#include "panoscene/errors.hpp"
#include "panoscene/pfm_io.hpp"
#include "panoscene/png_io.hpp"

namespace panoscene {

namespace {

using nlohmann::json;

json pose_to_json(const Pose& pose) {
  json j;
  j["position"] = {pose.position().x(), pose.position().y(), pose.position().z()};
  std::vector<double> rot(9);
  for (int i = 0; i < 3; i++) {
    for (int k = 0; k < 3; k++) {
      rot[3 * i + k] = pose.rotation()(i, k);
    }
  }
  j["rotation"] = rot;
  return j;
}

Pose pose_from_json(const json& j) {
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

json intrinsics_to_json(const CameraIntrinsics& k) {
  json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  j["width"] = k.width;
  j["height"] = k.height;
  return j;
}

class RemoteClient {
public:
  explicit RemoteClient(const RemoteConfig& config) : config_(config) {
    if (config_.base_url.empty()) {
      throw ParameterError("remote generator suite requires an endpoint URL");
    }
  }

  /// POSTs the JSON body, retrying once on any transport failure. Requests
  /// to one endpoint are serialized; the backends are not assumed to accept
  /// concurrent work.
  json post(const std::string& route, json body) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!body.contains("params")) {
      body["params"] = json::object();
    }
    body["params"]["seed"] = config_.seed;

    std::string last_error;
    for (int attempt = 0; attempt < 2; attempt++) {
      httplib::Client client(config_.base_url);
      const auto timeout = std::chrono::milliseconds(int64_t(config_.timeout_s * 1000.0));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);

      httplib::Result res = client.Post(route, body.dump(), "application/json");
      if (!res) {
        last_error = "connection to " + config_.base_url + route + " failed: " +
                     httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status) + " from " + route + ": " + res->body;
        continue;
      }
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        last_error = std::string("malformed JSON response from ") + route + ": " + e.what();
        continue;
      }
    }
    throw TransportError(last_error);
  }

private:
  RemoteConfig config_;
  mutable std::mutex mutex_;
};

Image image_from_b64(const json& j, const char* field) {
  if (!j.contains(field)) {
    throw TransportError(std::string("response missing field: ") + field);
  }
  return decode_png(base64_decode(j.at(field).get<std::string>()));
}

class RemoteInpainter final : public Inpainter {
public:
  explicit RemoteInpainter(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

  PerspectiveImage inpaint(const PerspectiveImage& image, const ViewMask& mask,
                           const std::string& instruction) override {
    json body;
    body["image_png_b64"] = base64_encode(encode_png(image.image));
    body["mask_png_b64"] = base64_encode(encode_mask_png(mask));
    body["instruction"] = instruction;
    body["params"] = json::object();
    const json res = client_->post("/v1/inpaint", body);

    PerspectiveImage out = image;
    Image decoded = image_from_b64(res, "image_png_b64");
    if (decoded.width != image.image.width || decoded.height != image.image.height) {
      throw TransportError("inpaint response has wrong dimensions");
    }
    out.image = std::move(decoded);
    return out;
  }

private:
  std::shared_ptr<RemoteClient> client_;
};

class RemotePanoInpainter final : public PanoInpainter {
public:
  explicit RemotePanoInpainter(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

  EquirectImage inpaint(const EquirectImage& pano, const ViewMask& mask) override {
    json body;
    body["image_png_b64"] = base64_encode(encode_png(pano.image));
    body["mask_png_b64"] = base64_encode(encode_mask_png(mask));
    body["instruction"] = "";
    body["params"] = {{"projection", "equirectangular"}};
    const json res = client_->post("/v1/inpaint", body);
    Image decoded = image_from_b64(res, "image_png_b64");
    if (decoded.width != pano.width() || decoded.height != pano.height()) {
      throw TransportError("panorama inpaint response has wrong dimensions");
    }
    return EquirectImage(std::move(decoded));
  }

private:
  std::shared_ptr<RemoteClient> client_;
};

class RemoteSuperResolver final : public SuperResolver {
public:
  explicit RemoteSuperResolver(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

  Image upscale(const Image& image) override {
    json body;
    body["image_png_b64"] = base64_encode(encode_png(image));
    body["params"] = {{"factor", 4}};
    const json res = client_->post("/v1/superres", body);
    Image decoded = image_from_b64(res, "image_png_b64");
    if (decoded.width != image.width * 4 || decoded.height != image.height * 4) {
      throw TransportError("super-resolution response is not 4x the input");
    }
    return decoded;
  }

private:
  std::shared_ptr<RemoteClient> client_;
};

class RemotePanoDepth final : public PanoDepthEstimator {
public:
  explicit RemotePanoDepth(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

  DepthMap estimate(const EquirectImage& pano) override {
    json body;
    body["image_png_b64"] = base64_encode(encode_png(pano.image));
    body["params"] = json::object();
    const json res = client_->post("/v1/panodepth", body);
    if (!res.contains("depth_pfm_b64")) {
      throw TransportError("panodepth response missing depth_pfm_b64");
    }
    DepthMap depth = decode_pfm(base64_decode(res.at("depth_pfm_b64").get<std::string>()));
    if (depth.width != pano.width() || depth.height != pano.height()) {
      throw TransportError("panodepth response has wrong dimensions");
    }
    return depth;
  }

private:
  std::shared_ptr<RemoteClient> client_;
};

class RemoteWarpRefiner final : public WarpRefiner {
public:
  explicit RemoteWarpRefiner(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

  WarpRefineResult refine(const PerspectiveImage& image, const DepthMap& depth,
                          const Pose& relative_pose, const CameraIntrinsics& intr) override {
    json body;
    body["image_png_b64"] = base64_encode(encode_png(image.image));
    body["depth_pfm_b64"] = base64_encode(encode_pfm(depth));
    body["pose"] = pose_to_json(relative_pose);
    body["intrinsics"] = intrinsics_to_json(intr);
    body["params"] = json::object();
    const json res = client_->post("/v1/warp", body);

    WarpRefineResult out;
    out.image.intrinsics = intr;
    out.image.pose = pose_compose(relative_pose, image.pose);
    out.image.image = image_from_b64(res, "image_png_b64");
    if (out.image.image.width != intr.width || out.image.image.height != intr.height) {
      throw TransportError("warp response has wrong dimensions");
    }
    if (!res.contains("mask_png_b64")) {
      throw TransportError("warp response missing mask_png_b64");
    }
    out.occlusion = decode_mask_png(base64_decode(res.at("mask_png_b64").get<std::string>()),
                                    MaskKind::kOcclusion);
    return out;
  }

private:
  std::shared_ptr<RemoteClient> client_;
};

class RemoteViewSynthesizer final : public ViewSynthesizer {
public:
  explicit RemoteViewSynthesizer(std::shared_ptr<RemoteClient> client)
      : client_(std::move(client)) {}

  SynthesizedViews synthesize(const PerspectiveImage& initial, const std::vector<Pose>& trajectory,
                              int frame_count) override {
    if (trajectory.empty()) {
      throw ParameterError("synthesize_views: empty trajectory");
    }
    json body;
    body["image_png_b64"] = base64_encode(encode_png(initial.image));
    body["intrinsics"] = intrinsics_to_json(initial.intrinsics);
    json poses = json::array();
    for (const Pose& p : trajectory) {
      poses.push_back(pose_to_json(p));
    }
    body["params"] = {{"frame_count", frame_count}, {"trajectory", poses}};
    const json res = client_->post("/v1/views", body);

    if (!res.contains("frames") || !res.at("frames").is_array()) {
      throw TransportError("views response missing frames array");
    }
    SynthesizedViews out;
    out.intrinsics = initial.intrinsics;
    for (const json& f : res.at("frames")) {
      out.frames.push_back(image_from_b64(f, "image_png_b64"));
      if (!f.contains("depth_pfm_b64")) {
        throw TransportError("views response frame missing depth_pfm_b64");
      }
      out.depths.push_back(decode_pfm(base64_decode(f.at("depth_pfm_b64").get<std::string>())));
      out.poses.push_back(pose_from_json(f.at("pose")));
    }
    if (out.frames.empty()) {
      throw TransportError("views response contained no frames");
    }
    return out;
  }

private:
  std::shared_ptr<RemoteClient> client_;
};

}  // namespace

GeneratorSuite make_remote_suite(const RemoteConfig& config) {
  auto client = std::make_shared<RemoteClient>(config);
  GeneratorSuite suite;
  suite.inpainter = std::make_shared<RemoteInpainter>(client);
  suite.pano_inpainter = std::make_shared<RemotePanoInpainter>(client);
  suite.super_resolver = std::make_shared<RemoteSuperResolver>(client);
  suite.depth_estimator = std::make_shared<RemotePanoDepth>(client);
  suite.warp_refiner = std::make_shared<RemoteWarpRefiner>(client);
  suite.view_synthesizer = std::make_shared<RemoteViewSynthesizer>(client);
  suite.kind = BackendKind::kRemote;
  return suite;
}

}  // namespace panoscene
