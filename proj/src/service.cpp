#include "histosynth/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "histosynth/checkpoint.hpp"
#include "histosynth/image_io.hpp"
#include "histosynth/latent.hpp"

namespace histosynth::service {
namespace {

using nlohmann::json;

/// Thrown inside handlers to short-circuit with an HTTP status.
struct HttpError {
  int status;
  json body;
};

[[noreturn]] void fail(int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  throw HttpError{status, std::move(extra)};
}

Response json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

std::string bytes_to_string(const std::vector<std::uint8_t>& b) { return {b.begin(), b.end()}; }
std::vector<std::uint8_t> string_to_bytes(const std::string& s) { return {s.begin(), s.end()}; }

std::uint32_t be32(const std::string& s, std::size_t at) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 3]));
}

json parse_json(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    fail(400, std::string("malformed JSON: ") + e.what());
  }
}

template <class T>
T field(const json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    fail(400, std::string("field '") + name + "' is missing or has the wrong type");
  }
}

LatentVector latent_from_json(const json& j) {
  std::vector<float> v;
  try {
    v = j.get<std::vector<float>>();
  } catch (const json::exception&) {
    fail(400, "latents must be arrays of numbers");
  }
  if (v.size() != static_cast<std::size_t>(kLatentDim))
    fail(422, "latent must have " + std::to_string(kLatentDim) + " components", {{"length", v.size()}});
  for (float x : v)
    if (!std::isfinite(x)) fail(422, "latent has a non-finite component");
  return LatentVector(std::move(v));
}

}  // namespace

void ServiceConfig::validate() const {
  if (max_pixels == 0) throw Error(ErrorCode::kConfig, "max pixels must be > 0");
  if (checkpoints.empty()) throw Error(ErrorCode::kConfig, "at least one checkpoint is required");
  if (port < 0 || port > 65535) throw Error(ErrorCode::kConfig, "port out of range");
  if (max_interpolation_steps < 2) throw Error(ErrorCode::kConfig, "max interpolation steps must be >= 2");
  if (threads < 1) throw Error(ErrorCode::kConfig, "threads must be >= 1");
}

std::vector<std::filesystem::path> discover_checkpoints(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kIo, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".hsck") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

SynthesisService::SynthesisService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (const auto& path : cfg_.checkpoints) {
    const auto id = path.stem().string();
    if (models_.count(id)) throw Error(ErrorCode::kConfig, "duplicate model id '" + id + "'");
    models_.emplace(id, train::load_synthesis_model(path));
  }
}

SynthesisService::SynthesisService(ServiceConfig cfg, std::map<std::string, train::SynthesisModel> models)
    : cfg_(std::move(cfg)), models_(std::move(models)) {
  if (models_.empty()) throw Error(ErrorCode::kConfig, "at least one model is required");
  if (cfg_.max_pixels == 0) throw Error(ErrorCode::kConfig, "max pixels must be > 0");
  for (auto& [id, m] : models_)
    for (auto& p : m.generator->parameters()) p.set_requires_grad(false);
}

std::vector<std::string> SynthesisService::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, m] : models_) ids.push_back(id);
  return ids;
}

std::uint32_t SynthesisService::parameter_hash() const {
  std::uint32_t h = 0;
  for (const auto& [id, m] : models_) h = h * 31u + histosynth::parameter_hash(*m.generator);
  return h;
}

namespace {

struct Resolved {
  const train::SynthesisModel* model;
  LabelMap labels;
};

const train::SynthesisModel& find_model(const std::map<std::string, train::SynthesisModel>& models,
                                        const std::string& id) {
  if (id.empty() && models.size() == 1) return models.begin()->second;
  const auto it = models.find(id);
  if (it == models.end()) fail(404, "unknown model '" + id + "'", {{"model", id}});
  return it->second;
}

/// Size check on the PNG header first, so oversized maps are never decoded.
LabelMap read_label_map(const std::string& png, const train::SynthesisModel& model, std::size_t max_pixels) {
  static const std::string kSignature = "\x89PNG\r\n\x1a\n";
  if (png.size() < 24 || png.compare(0, 8, kSignature) != 0 || png.compare(12, 4, "IHDR") != 0)
    fail(400, "label map is not a PNG stream");
  const std::uint64_t w = be32(png, 16), h = be32(png, 20);
  if (w * h > max_pixels)
    fail(413, "label map has " + std::to_string(w * h) + " pixels, limit is " + std::to_string(max_pixels),
         {{"width", w}, {"height", h}, {"max_pixels", max_pixels}});
  const int k = model.palette.size();
  LabelMap m;
  try {
    m = io::decode_label_png(string_to_bytes(png), k);
  } catch (const Error& e) {
    fail(400, std::string("cannot decode label map: ") + e.what());
  }
  const int r = model.config.generator.resolution;
  if (m.width != r || m.height != r)
    fail(422, "label map is " + std::to_string(m.width) + "x" + std::to_string(m.height) + ", model expects " +
                  std::to_string(r) + "x" + std::to_string(r),
         {{"width", m.width}, {"height", m.height}, {"resolution", r}});
  for (std::size_t i = 0; i < m.values.size(); ++i)
    if (m.values[i] >= k) {
      const int x = static_cast<int>(i % m.width), y = static_cast<int>(i / m.width);
      fail(422, "label value " + std::to_string(m.values[i]) + " at (" + std::to_string(x) + ", " + std::to_string(y) +
                    ") is not a class of this model (K = " + std::to_string(k) + ")",
           {{"value", m.values[i]}, {"index", m.values[i]}, {"pixel", {x, y}}, {"num_classes", k}});
    }
  return m;
}

std::string render(const train::SynthesisModel& model, const LabelMap& m, const LatentVector& z) {
  auto g = model.generator;
  return bytes_to_string(io::encode_png(denormalize(net::generate(g, m, z))));
}

std::uint64_t seed_from(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(400, "seed must be a non-negative integer");
  }
}

}  // namespace

Response SynthesisService::health() const {
  return json_response(200, {{"status", "ok"}, {"models", models_.size()}});
}

Response SynthesisService::models() const {
  json list = json::array();
  for (const auto& [id, m] : models_) {
    list.push_back({{"id", id},
                    {"resolution", m.config.generator.resolution},
                    {"num_classes", m.palette.size()},
                    {"iteration", m.iteration},
                    {"latent_dim", m.config.generator.latent_dim},
                    {"palette", json::parse(io::palette_to_json(m.palette))}});
  }
  return json_response(200, {{"models", list}, {"max_pixels", cfg_.max_pixels}});
}

Response SynthesisService::synthesize(const Request& req) const {
  const bool raw_png = req.content_type.rfind("image/png", 0) == 0;
  if (raw_png) {
    const auto model_it = req.query.find("model");
    const auto& model = find_model(models_, model_it == req.query.end() ? "" : model_it->second);
    const auto labels = read_label_map(req.body, model, cfg_.max_pixels);
    const auto seed_it = req.query.find("seed");
    const auto seed = seed_it == req.query.end() ? cfg_.default_seed : seed_from(seed_it->second);
    return {200, "image/png", render(model, labels, latent::latent_from_seed(seed))};
  }

  const auto j = parse_json(req.body);
  if (!j.is_object()) fail(400, "request body must be a JSON object");
  const auto& model = find_model(models_, j.value("model", std::string()));
  std::string png;
  try {
    png = base64_decode(field<std::string>(j, "label_png"));
  } catch (const Error& e) {
    fail(400, e.what());
  }
  const auto labels = read_label_map(png, model, cfg_.max_pixels);

  const int given = static_cast<int>(j.contains("seed")) + static_cast<int>(j.contains("latent")) +
                    static_cast<int>(j.contains("latents"));
  if (given > 1) fail(400, "give exactly one of seed, latent, or latents + t");
  if (j.contains("t") && !j.contains("latents")) fail(400, "t requires latents");
  LatentVector z;
  if (j.contains("latent")) {
    z = latent_from_json(j.at("latent"));
  } else if (j.contains("latents")) {
    const auto& pair = j.at("latents");
    if (!pair.is_array() || pair.size() != 2) fail(400, "latents must hold exactly two latent vectors");
    const double t = field<double>(j, "t");
    if (!(t >= 0.0 && t <= 1.0)) fail(422, "t must lie in [0, 1]", {{"t", t}});
    z = latent::lerp(latent_from_json(pair[0]), latent_from_json(pair[1]), t);
  } else {
    const std::uint64_t seed = j.contains("seed") ? field<std::uint64_t>(j, "seed") : cfg_.default_seed;
    z = latent::latent_from_seed(seed);
  }
  return {200, "image/png", render(model, labels, z)};
}

Response SynthesisService::interpolate(const Request& req) const {
  const auto j = parse_json(req.body);
  if (!j.is_object()) fail(400, "request body must be a JSON object");
  const auto& model = find_model(models_, j.value("model", std::string()));
  std::string png;
  try {
    png = base64_decode(field<std::string>(j, "label_png"));
  } catch (const Error& e) {
    fail(400, e.what());
  }
  const auto labels = read_label_map(png, model, cfg_.max_pixels);
  const int steps = j.contains("steps") ? field<int>(j, "steps") : 5;
  if (steps < 2 || steps > cfg_.max_interpolation_steps)
    fail(422, "steps must lie in [2, " + std::to_string(cfg_.max_interpolation_steps) + "]", {{"steps", steps}});

  LatentVector a, b;
  if (j.contains("latents") == j.contains("seeds")) fail(400, "give exactly one of latents or seeds");
  if (j.contains("latents")) {
    const auto& pair = j.at("latents");
    if (!pair.is_array() || pair.size() != 2) fail(400, "latents must hold exactly two latent vectors");
    a = latent_from_json(pair[0]);
    b = latent_from_json(pair[1]);
  } else {
    const auto seeds = field<std::vector<std::uint64_t>>(j, "seeds");
    if (seeds.size() != 2) fail(400, "seeds must hold exactly two seeds");
    a = latent::latent_from_seed(seeds[0]);
    b = latent::latent_from_seed(seeds[1]);
  }

  auto g = model.generator;
  const auto frames = latent::interpolation_sequence(g, labels, a, b, steps);
  std::ostringstream body;
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / (steps - 1);
    body << "--" << kMultipartBoundary << "\r\n"
         << "Content-Type: image/png\r\n"
         << "Content-Disposition: attachment; filename=\"frame_" << std::setw(3) << std::setfill('0') << i
         << ".png\"\r\n"
         << "X-Frame-Index: " << i << "\r\n"
         << "X-Frame-T: " << std::setprecision(17) << t << "\r\n\r\n"
         << bytes_to_string(io::encode_png(denormalize(frames[i]))) << "\r\n";
  }
  body << "--" << kMultipartBoundary << "--\r\n";
  return {200, std::string("multipart/mixed; boundary=") + kMultipartBoundary, body.str()};
}

Response SynthesisService::handle(const Request& req) const {
  try {
    if (req.path == "/health" && req.method == "GET") return health();
    if (req.path == "/models" && req.method == "GET") return models();
    if (req.path == "/synthesize" && req.method == "POST") return synthesize(req);
    if (req.path == "/interpolate" && req.method == "POST") return interpolate(req);
    if (req.path == "/health" || req.path == "/models" || req.path == "/synthesize" || req.path == "/interpolate")
      return json_response(405, {{"error", "method not allowed"}});
    return json_response(404, {{"error", "no such endpoint '" + req.path + "'"}});
  } catch (const HttpError& e) {
    return json_response(e.status, e.body);
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::kInvalidLabel || e.code() == ErrorCode::kShape ||
                               e.code() == ErrorCode::kRange
                           ? 422
                           : 500;
    return json_response(status, {{"error", e.what()}, {"code", to_string(e.code())}});
  } catch (const std::exception& e) {
    return json_response(500, {{"error", e.what()}});
  }
}

void SynthesisService::mount(httplib::Server& server) const {
  auto adapt = [this](const httplib::Request& in, httplib::Response& out) {
    Request req;
    req.method = in.method;
    req.path = in.path;
    req.content_type = in.get_header_value("Content-Type");
    req.body = in.body;
    for (const auto& [k, v] : in.params) req.query[k] = v;
    const auto r = handle(req);
    out.status = r.status;
    out.set_header("Access-Control-Allow-Origin", "*");
    out.set_content(r.body, r.content_type);
  };
  server.Get("/health", adapt);
  server.Get("/models", adapt);
  server.Post("/synthesize", adapt);
  server.Post("/interpolate", adapt);
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& out) {
    out.set_header("Access-Control-Allow-Origin", "*");
    out.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    out.set_header("Access-Control-Allow-Headers", "Content-Type");
    out.status = 204;
  });
  server.set_payload_max_length(64u << 20);
}

void SynthesisService::serve() const {
  httplib::Server server;
  const int threads = cfg_.threads;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  mount(server);
  std::cerr << "serving " << models_.size() << " model(s) on http://" << cfg_.host << ":" << cfg_.port << "\n";
  if (!server.listen(cfg_.host, cfg_.port))
    throw Error(ErrorCode::kIo, "cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
}

std::vector<std::string> split_multipart(const std::string& body, const std::string& boundary) {
  std::vector<std::string> parts;
  const std::string delim = "--" + boundary;
  std::size_t pos = body.find(delim);
  while (pos != std::string::npos) {
    pos += delim.size();
    if (body.compare(pos, 2, "--") == 0) break;
    const auto header_end = body.find("\r\n\r\n", pos);
    if (header_end == std::string::npos) break;
    const auto start = header_end + 4;
    const auto next = body.find("\r\n" + delim, start);
    if (next == std::string::npos) break;
    parts.push_back(body.substr(start, next - start));
    pos = next + 2;
  }
  return parts;
}

std::string base64_encode(const std::string& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::string base64_decode(const std::string& text) {
  using namespace boost::archive::iterators;
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw Error(ErrorCode::kInvalidArgument, "base64 length is not a multiple of 4");
  std::size_t pad = 0;
  while (pad < 2 && !clean.empty() && clean[clean.size() - 1 - pad] == '=') ++pad;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const char c = clean[i];
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/' ||
                    (c == '=' && i >= clean.size() - pad);
    if (!ok) throw Error(ErrorCode::kInvalidArgument, "invalid base64 character");
  }
  std::replace(clean.end() - static_cast<std::ptrdiff_t>(pad), clean.end(), '=', 'A');
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::string out(It(clean.begin()), It(clean.end()));
  out.resize(out.size() - pad);
  return out;
}

}  // namespace histosynth::service
