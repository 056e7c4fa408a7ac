#pragma once

// In-process model server speaking the wire protocol: mock segmentation and
// a zero-padded baseline embedding. Fault switches exist for client tests.

#include <string>

#include <nlohmann/json.hpp>

#include "occam/codec.hpp"
#include "occam/embedding.hpp"
#include "occam/io.hpp"
#include "occam/mock_provider.hpp"

namespace fake {

struct Options {
  int embed_dim = 2048;
  int reported_dim = -1;  // dimension actually returned; -1 = embed_dim
  bool echo_wrong_id = false;
  bool fail_embed = false;
  bool segment = true;
  double min_visible_frac = 0.0;
};

class Server {
 public:
  explicit Server(Options o = {}) : opts_(o), mock_({{0, 0, 0}, o.min_visible_frac, true}) {}

  nlohmann::json handle(const nlohmann::json& req) {
    ++requests_;
    nlohmann::json res = nlohmann::json::object();
    if (req.contains("id")) {
      res["id"] = req["id"];
      if (opts_.echo_wrong_id) res["id"] = "x" + req["id"].get<std::string>();
    }
    try {
      const std::string op = req.value("op", "");
      if (op == "hello") {
        res["caps"] = {{"segment", opts_.segment},
                       {"embed", true},
                       {"embed_dim", opts_.embed_dim},
                       {"deterministic", true}};
      } else if (op == "segment") {
        const occam::Image img = decode(req.at("image").at("png_b64").get<std::string>());
        std::vector<occam::SeedPoint> pts;
        for (const auto& p : req.at("points")) pts.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        res["masks"] = occam::masks_to_json(mock_.segment_points(img, pts, ""));
      } else if (op == "embed") {
        if (opts_.fail_embed) throw std::runtime_error("embedding model unavailable");
        const occam::Image patch = decode(req.at("patch").at("png_b64").get<std::string>());
        auto v = occam::baseline_embed(patch);
        v.resize(static_cast<std::size_t>(opts_.reported_dim >= 0 ? opts_.reported_dim : opts_.embed_dim), 0.0);
        res["vector"] = v;
      } else {
        res["error"] = "unknown op '" + op + "'";
      }
    } catch (const std::exception& e) {
      res.erase("masks");
      res.erase("vector");
      res["error"] = e.what();
    }
    return res;
  }

  int requests() const { return requests_; }

 private:
  static occam::Image decode(const std::string& b64) {
    const auto bytes = occam::codec::base64_decode(b64);
    return occam::io::decode_image(bytes);
  }

  Options opts_;
  occam::MockProvider mock_;
  int requests_ = 0;
};

}  // namespace fake
