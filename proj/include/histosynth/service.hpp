#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histosynth/training.hpp"

namespace httplib {
class Server;
}

namespace histosynth::service {

/// Environment variable naming a directory whose *.hsck GAN checkpoints are served.
inline constexpr const char* kCheckpointDirEnv = "HISTOSYNTH_CHECKPOINT_DIR";

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::filesystem::path> checkpoints;
  /// Largest accepted label map, in pixels (width * height).
  std::size_t max_pixels = 1024 * 1024;
  /// Seed used when a request names neither a seed nor a latent.
  std::uint64_t default_seed = 0;
  int max_interpolation_steps = 64;
  int threads = 4;

  void validate() const;
};

/// Every *.hsck file in dir, sorted by name.
std::vector<std::filesystem::path> discover_checkpoints(const std::filesystem::path& dir);

struct Request {
  std::string method;
  std::string path;
  std::string content_type;
  std::string body;
  std::map<std::string, std::string> query;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Inference-only synthesis over a fixed set of models. Models are loaded once and never
/// mutated; handle() is safe to call from many threads at once.
///
///   GET  /health       {"status": "ok", "models": n}
///   GET  /models       ids, palettes, resolutions, class counts
///   POST /synthesize   JSON {"model", "label_png" (base64), and one of "seed" | "latent" |
///                      "latents" + "t"} or a raw image/png body with ?model=&seed=; returns image/png
///   POST /interpolate  JSON {"model", "label_png", "steps", and "latents" | "seeds" (two each)};
///                      returns multipart/mixed with one image/png part per frame, in order
///
/// Errors are JSON {"error": message, ...}: 400 malformed, 404 unknown model, 413 oversized map,
/// 422 invalid label values (with "value" and "pixel") or a size other than the model's.
class SynthesisService {
 public:
  explicit SynthesisService(ServiceConfig cfg);
  /// Pre-loaded models keyed by id (tests, embedding).
  SynthesisService(ServiceConfig cfg, std::map<std::string, train::SynthesisModel> models);

  Response handle(const Request& req) const;

  Response health() const;
  Response models() const;
  Response synthesize(const Request& req) const;
  Response interpolate(const Request& req) const;

  /// CRC over every served model's parameters; constant for the service's lifetime.
  std::uint32_t parameter_hash() const;

  const ServiceConfig& config() const { return cfg_; }
  std::vector<std::string> model_ids() const;

  /// Routes every endpoint onto an httplib server.
  void mount(httplib::Server& server) const;
  /// Blocks serving on cfg.host:cfg.port.
  void serve() const;

 private:
  ServiceConfig cfg_;
  std::map<std::string, train::SynthesisModel> models_;
};

/// Multipart boundary used by /interpolate.
inline constexpr const char* kMultipartBoundary = "histosynth-frame-boundary";

/// Splits a multipart/mixed body produced by /interpolate back into its part payloads.
std::vector<std::string> split_multipart(const std::string& body, const std::string& boundary = kMultipartBoundary);

std::string base64_encode(const std::string& bytes);
/// Throws kInvalidArgument on characters outside the standard alphabet.
std::string base64_decode(const std::string& text);

}  // namespace histosynth::service
