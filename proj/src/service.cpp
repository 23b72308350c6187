#include "cyscolor/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

namespace cys {

void to_json(nlohmann::json& j, const ServiceConfig& c) {
  j = {{"host", c.host},
       {"port", c.port},
       {"palette_model", c.palette_model.string()},
       {"colorizer_model", c.colorizer_model.string()},
       {"data_dir", c.data_dir.string()},
       {"categories_file", c.categories_file.string()},
       {"session_ttl_seconds", c.session_ttl_seconds},
       {"max_upload_bytes", c.max_upload_bytes}};
}

void from_json(const nlohmann::json& j, ServiceConfig& c) {
  c = ServiceConfig{};
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.palette_model = j.value("palette_model", std::string());
  c.colorizer_model = j.value("colorizer_model", std::string());
  c.data_dir = j.value("data_dir", c.data_dir.string());
  c.categories_file = j.value("categories_file", std::string());
  c.session_ttl_seconds = j.value("session_ttl_seconds", c.session_ttl_seconds);
  c.max_upload_bytes = j.value("max_upload_bytes", c.max_upload_bytes);
  if (c.port < 0 || c.port > 65535) throw ValidationError("port must be in 0..65535");
  if (c.session_ttl_seconds <= 0) throw ValidationError("session_ttl_seconds must be positive");
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  ServiceConfig c;
  try {
    c = nlohmann::json::parse(in).get<ServiceConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  // Relative paths in the file resolve against the file's directory.
  const auto base = path.parent_path();
  for (auto* p : {&c.palette_model, &c.colorizer_model, &c.data_dir, &c.categories_file}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return c;
}

void ServiceConfig::apply_environment() {
  if (const char* v = std::getenv("CYS_PORT")) {
    char* end = nullptr;
    const long port = std::strtol(v, &end, 10);
    if (*v == '\0' || *end != '\0' || port < 0 || port > 65535) {
      throw ValidationError(std::string("CYS_PORT must be a port number, got \"") + v + "\"");
    }
    this->port = static_cast<int>(port);
  }
  if (const char* v = std::getenv("CYS_PALETTE_MODEL")) palette_model = v;
  if (const char* v = std::getenv("CYS_COLORIZER_MODEL")) colorizer_model = v;
  if (const char* v = std::getenv("CYS_DATA_DIR")) data_dir = v;
}

CategoryVocabulary ServiceConfig::categories() const {
  return categories_file.empty() ? CategoryVocabulary::cys_default() : CategoryVocabulary::load(categories_file);
}

nlohmann::json FeedbackRecord::to_json() const {
  return {{"session_id", session_id},
          {"original_palette", original.to_hex()},
          {"adjusted_palette", adjusted.to_hex()},
          {"context", {{"text", text}, {"category", category}, {"image_hash", image_hash}}},
          {"timestamp", timestamp},
          {"model_version", model_version}};
}

FeedbackRecord FeedbackRecord::from_json(const nlohmann::json& j) {
  FeedbackRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.original = Palette::from_hex(j.at("original_palette").get<std::vector<std::string>>());
  r.adjusted = Palette::from_hex(j.at("adjusted_palette").get<std::vector<std::string>>());
  r.text = j.at("context").at("text").get<std::string>();
  r.category = j.at("context").at("category").get<std::string>();
  r.image_hash = j.at("context").at("image_hash").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.model_version = j.at("model_version").get<std::string>();
  return r;
}

FeedbackLog::FeedbackLog(std::filesystem::path path) : path_(std::move(path)) {}

void FeedbackLog::append(const FeedbackRecord& record) {
  const std::string line = record.to_json().dump() + "\n";
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open feedback log " + path_.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error("feedback write failed: " + std::string(std::strerror(err)));
    }
    written += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw Error("feedback fsync failed: " + path_.string());
}

struct Gateway::Session {
  std::mutex mutex;
  std::string id;
  Palette original;
  Palette current;
  std::string text;
  std::string category;
  std::string image_hash;
  GrayImage gray;
  std::string model_version;
  std::chrono::steady_clock::time_point expires;
};

namespace {

using Clock = std::chrono::steady_clock;

struct FieldError : Error {
  std::string field;
  int status;
  FieldError(std::string f, const std::string& message, int code = 400)
      : Error(message), field(std::move(f)), status(code) {}
};

void send_error(httplib::Response& res, int status, const std::string& field, const std::string& message) {
  res.status = status;
  nlohmann::json body = {{"error", {{"message", message}}}};
  if (!field.empty()) body["error"]["field"] = field;
  res.set_content(body.dump(), "application/json");
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng(std::random_device{}());
  return hex64(rng()) + hex64(rng());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char date[32];
  std::strftime(date, sizeof date, "%Y-%m-%dT%H:%M:%S", &tm);
  char millis[8];
  std::snprintf(millis, sizeof millis, ".%03d", static_cast<int>(ms));
  return std::string(date) + millis + "Z";
}

std::optional<std::string> form_field(const httplib::Request& req, const std::string& name) {
  if (req.has_file(name)) return req.get_file_value(name).content;
  if (req.has_param(name)) return req.get_param_value(name);
  return std::nullopt;
}

std::string required_field(const httplib::Request& req, const std::string& name) {
  auto v = form_field(req, name);
  if (!v) throw FieldError(name, name + ": field is required");
  return *v;
}

std::uint64_t parse_seed(const std::optional<std::string>& text) {
  if (!text || text->empty()) return 0;
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if ((*text)[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(*text, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != text->size()) throw FieldError("seed", "seed: expected a non-negative integer, got \"" + *text + "\"");
  return v;
}

Palette parse_palette_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FieldError("palette", "palette: expected an array of 5 \"#RRGGBB\" strings");
  std::vector<std::string> hex;
  for (const auto& v : j) {
    if (!v.is_string()) throw FieldError("palette", "palette: entries must be \"#RRGGBB\" strings");
    hex.push_back(v.get<std::string>());
  }
  try {
    return Palette::from_hex(hex);
  } catch (const Error& e) {
    throw FieldError("palette", std::string("palette: ") + e.what());
  }
}

Palette parse_palette_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_discarded()) return parse_palette_json(j);
  nlohmann::json arr = nlohmann::json::array();
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    part.erase(0, part.find_first_not_of(" \t"));
    part.erase(part.find_last_not_of(" \t\r\n") + 1);
    arr.push_back(part);
  }
  return parse_palette_json(arr);
}

struct Upload {
  std::string bytes;
  GrayImage gray;
  std::string hash;
};

Upload decode_upload(const httplib::Request& req) {
  if (!req.has_file("image")) throw FieldError("image", "image: file upload is required");
  Upload up;
  up.bytes = req.get_file_value("image").content;
  if (up.bytes.empty()) throw FieldError("image", "image: upload is empty");
  try {
    const auto* data = reinterpret_cast<const std::uint8_t*>(up.bytes.data());
    up.gray = luminance(decode_image({data, up.bytes.size()}));
  } catch (const Error& e) {
    throw FieldError("image", std::string("image: ") + e.what());
  }
  up.hash = hex64(fnv1a64(up.bytes));
  return up;
}

std::string image_extension(const std::string& bytes) {
  return bytes.size() > 3 && static_cast<unsigned char>(bytes[0]) == 0xFF && static_cast<unsigned char>(bytes[1]) == 0xD8
             ? ".jpg"
             : ".png";
}

}  // namespace

struct GatewayHandlers {
  template <typename F>
  static void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const FieldError& e) {
      send_error(res, e.status, e.field, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, "", e.what());
    } catch (const ParseError& e) {
      send_error(res, 400, "", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "", e.what());
    }
  }

  static std::shared_ptr<Gateway::Session> find_session(Gateway& g, const std::string& id) {
    std::lock_guard lock(g.session_mutex_);
    const auto now = Clock::now();
    for (auto it = g.sessions_.begin(); it != g.sessions_.end();) {
      it = it->second->expires < now ? g.sessions_.erase(it) : std::next(it);
    }
    const auto it = g.sessions_.find(id);
    if (it == g.sessions_.end()) throw FieldError("session_id", "session_id: unknown or expired session", 404);
    return it->second;
  }

  static void store_image(const Gateway& g, const Upload& up) {
    const auto dir = g.config_.data_dir / "images";
    std::filesystem::create_directories(dir);
    const auto path = dir / (up.hash + image_extension(up.bytes));
    if (std::filesystem::exists(path)) return;
    const auto* data = reinterpret_cast<const std::uint8_t*>(up.bytes.data());
    const auto tmp = path.string() + ".tmp" + new_session_id();
    write_file_bytes(tmp, {data, up.bytes.size()});
    std::filesystem::rename(tmp, path);
  }

  static void palette(Gateway& g, const httplib::Request& req, httplib::Response& res) {
    const auto model = g.palette_model();
    if (!model) return send_error(res, 503, "", "no palette model loaded");
    const std::string text = required_field(req, "text");
    const std::string category = required_field(req, "category");
    if (!g.categories_.find(category)) throw FieldError("category", "category: unknown category \"" + category + "\"");
    if (!model->categories.find(category)) {
      throw FieldError("category", "category: \"" + category + "\" is not known to the loaded model");
    }
    const std::uint64_t seed = parse_seed(form_field(req, "seed"));
    Upload up = decode_upload(req);
    const Palette palette = model->gan.sample_palette(model->context(text, category, up.gray), seed);
    store_image(g, up);

    auto session = std::make_shared<Gateway::Session>();
    session->id = new_session_id();
    session->original = session->current = palette;
    session->text = text;
    session->category = category;
    session->image_hash = up.hash;
    session->gray = std::move(up.gray);
    session->model_version = model->version;
    session->expires = Clock::now() + std::chrono::seconds(g.config_.session_ttl_seconds);
    {
      std::lock_guard lock(g.session_mutex_);
      g.sessions_[session->id] = session;
    }
    {
      std::lock_guard lock(g.metrics_mutex_);
      ++g.metrics_.palette_requests;
    }
    const nlohmann::json body = {
        {"palette", palette.to_hex()}, {"session_id", session->id}, {"model_version", model->version}};
    res.set_content(body.dump(), "application/json");
  }

  static void adjust(Gateway& g, const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw FieldError("", "request body must be a JSON object");
    if (!body.contains("session_id") || !body["session_id"].is_string()) {
      throw FieldError("session_id", "session_id: field is required");
    }
    if (!body.contains("palette")) throw FieldError("palette", "palette: field is required");
    const Palette adjusted = parse_palette_json(body["palette"]);
    const auto session = find_session(g, body["session_id"].get<std::string>());

    std::lock_guard lock(session->mutex);
    FeedbackRecord rec{session->id,       session->original,    adjusted, session->text, session->category,
                       session->image_hash, utc_timestamp(), session->model_version};
    g.feedback_.append(rec);
    session->current = adjusted;
    session->expires = Clock::now() + std::chrono::seconds(g.config_.session_ttl_seconds);
    {
      std::lock_guard mlock(g.metrics_mutex_);
      ++g.metrics_.adjust_requests;
    }
    res.status = 204;
  }

  static void colorize(Gateway& g, const httplib::Request& req, httplib::Response& res) {
    const auto start = Clock::now();
    const auto model = g.colorizer_model();
    if (!model) return send_error(res, 503, "", "no colorizer model loaded");

    std::optional<std::string> session_id;
    std::optional<std::string> palette_text;
    nlohmann::json json_body;
    if (req.is_multipart_form_data()) {
      session_id = form_field(req, "session_id");
      palette_text = form_field(req, "palette");
    } else {
      json_body = nlohmann::json::parse(req.body, nullptr, false);
      if (json_body.is_discarded() || !json_body.is_object()) {
        throw FieldError("", "send multipart form data, or a JSON object with session_id");
      }
      if (json_body.contains("session_id")) {
        if (!json_body["session_id"].is_string()) throw FieldError("session_id", "session_id: expected a string");
        session_id = json_body["session_id"].get<std::string>();
      }
    }
    const std::uint64_t seed =
        req.is_multipart_form_data()
            ? parse_seed(form_field(req, "seed"))
            : parse_seed(json_body.contains("seed") ? std::optional(json_body["seed"].dump()) : std::nullopt);

    Palette palette;
    GrayImage gray;
    std::string text, category;
    if (session_id && !session_id->empty()) {
      const auto session = find_session(g, *session_id);
      std::lock_guard lock(session->mutex);
      palette = session->current;
      gray = session->gray;
      text = session->text;
      category = session->category;
    } else {
      if (!palette_text) throw FieldError("palette", "palette: required when no session_id is given");
      palette = parse_palette_text(*palette_text);
      gray = decode_upload(req).gray;
      text = form_field(req, "text").value_or("");
      category = form_field(req, "category").value_or(g.categories_.names().front());
      if (!g.categories_.find(category)) throw FieldError("category", "category: unknown category \"" + category + "\"");
    }
    if (!model->categories.find(category)) {
      throw FieldError("category", "category: \"" + category + "\" is not known to the colorizer model");
    }
    const ColorizedImage out = model->gan.colorize_full(gray, palette, model->context(text, category, gray), seed);
    const auto png = encode_png(out.rgb, 16);
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    {
      std::lock_guard lock(g.metrics_mutex_);
      ++g.metrics_.colorize_requests;
      g.metrics_.last_colorize_ms = ms;
      g.metrics_.total_colorize_ms += ms;
      g.metrics_.gamut_mapped_pixels += out.gamut_mapped_pixels;
    }
    res.set_header("X-Model-Version", model->version);
    res.set_header("X-Gamut-Mapped-Pixels", std::to_string(out.gamut_mapped_pixels));
    res.set_header("X-Latency-Ms", std::to_string(ms));
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }
};

Gateway::Gateway(ServiceConfig config)
    : config_(std::move(config)),
      categories_(config_.categories()),
      feedback_(config_.data_dir / "feedback.jsonl") {
  if (categories_.size() == 0) throw ValidationError("category vocabulary is empty");
}

Gateway::~Gateway() { stop(); }

void Gateway::load_models() {
  if (!config_.palette_model.empty()) {
    set_palette_model(std::make_shared<const PaletteModel>(PaletteModel::load(config_.palette_model)));
  }
  if (!config_.colorizer_model.empty()) {
    set_colorizer_model(std::make_shared<const ColorizerModel>(ColorizerModel::load(config_.colorizer_model)));
  }
}

void Gateway::set_palette_model(std::shared_ptr<const PaletteModel> model) {
  std::lock_guard lock(model_mutex_);
  palette_ = std::move(model);
}

void Gateway::set_colorizer_model(std::shared_ptr<const ColorizerModel> model) {
  std::lock_guard lock(model_mutex_);
  colorizer_ = std::move(model);
}

std::shared_ptr<const PaletteModel> Gateway::palette_model() const {
  std::lock_guard lock(model_mutex_);
  return palette_;
}

std::shared_ptr<const ColorizerModel> Gateway::colorizer_model() const {
  std::lock_guard lock(model_mutex_);
  return colorizer_;
}

ServiceMetrics Gateway::metrics() const {
  std::lock_guard lock(metrics_mutex_);
  return metrics_;
}

void Gateway::mount(httplib::Server& server) {
  server.set_payload_max_length(config_.max_upload_bytes);
  server.Post("/v1/palette", [this](const httplib::Request& req, httplib::Response& res) {
    GatewayHandlers::guarded(res, [&] { GatewayHandlers::palette(*this, req, res); });
  });
  server.Post("/v1/palette/adjust", [this](const httplib::Request& req, httplib::Response& res) {
    GatewayHandlers::guarded(res, [&] { GatewayHandlers::adjust(*this, req, res); });
  });
  server.Post("/v1/colorize", [this](const httplib::Request& req, httplib::Response& res) {
    GatewayHandlers::guarded(res, [&] { GatewayHandlers::colorize(*this, req, res); });
  });
  server.Get("/v1/categories", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json(categories_.names()).dump(), "application/json");
  });
  server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    const auto p = palette_model();
    const auto c = colorizer_model();
    const ServiceMetrics m = metrics();
    const nlohmann::json body = {
        {"palette_model", p ? nlohmann::json(p->version) : nlohmann::json(nullptr)},
        {"colorizer_model", c ? nlohmann::json(c->version) : nlohmann::json(nullptr)},
        {"metrics",
         {{"palette_requests", m.palette_requests},
          {"adjust_requests", m.adjust_requests},
          {"colorize_requests", m.colorize_requests},
          {"last_colorize_ms", m.last_colorize_ms},
          {"mean_colorize_ms", m.colorize_requests ? m.total_colorize_ms / m.colorize_requests : 0.0},
          {"gamut_mapped_pixels", m.gamut_mapped_pixels}}}};
    res.set_content(body.dump(), "application/json");
  });
}

bool Gateway::listen() {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  return server_->listen(config_.host, config_.port);
}

int Gateway::bind_any_port() {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  return server_->bind_to_any_port(config_.host);
}

bool Gateway::listen_after_bind() { return server_ && server_->listen_after_bind(); }

void Gateway::stop() {
  if (server_) server_->stop();
}

}  // namespace cys
