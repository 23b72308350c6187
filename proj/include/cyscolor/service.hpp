#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "cyscolor/models.hpp"

namespace httplib {
class Server;
}

namespace cys {

/// Shared by `cys serve` and the gateway. Environment overrides:
/// CYS_PORT, CYS_PALETTE_MODEL, CYS_COLORIZER_MODEL, CYS_DATA_DIR.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path palette_model;
  std::filesystem::path colorizer_model;
  std::filesystem::path data_dir = "data";
  std::filesystem::path categories_file;  ///< empty: the built-in fourteen
  int session_ttl_seconds = 3600;
  std::size_t max_upload_bytes = 20u << 20;

  static ServiceConfig load(const std::filesystem::path& path);
  /// Applies CYS_* variables from `getenv`.
  void apply_environment();
  CategoryVocabulary categories() const;
};

void to_json(nlohmann::json& j, const ServiceConfig& c);
void from_json(const nlohmann::json& j, ServiceConfig& c);

struct FeedbackRecord {
  std::string session_id;
  Palette original;
  Palette adjusted;
  std::string text;
  std::string category;
  std::string image_hash;
  std::string timestamp;  ///< UTC, ISO 8601
  std::string model_version;

  nlohmann::json to_json() const;
  static FeedbackRecord from_json(const nlohmann::json& j);
};

/// Append-only JSONL writer; each append is flushed and fsync'ed before returning.
class FeedbackLog {
 public:
  explicit FeedbackLog(std::filesystem::path path);
  void append(const FeedbackRecord& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct ServiceMetrics {
  std::uint64_t palette_requests = 0;
  std::uint64_t adjust_requests = 0;
  std::uint64_t colorize_requests = 0;
  double last_colorize_ms = 0.0;
  double total_colorize_ms = 0.0;
  std::uint64_t gamut_mapped_pixels = 0;
};

/// HTTP gateway for the generate / adjust / colorize flow.
class Gateway {
 public:
  explicit Gateway(ServiceConfig config);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Loads whichever model paths the config names.
  void load_models();
  /// Atomically replaces the snapshot served to new requests; nullptr unloads.
  void set_palette_model(std::shared_ptr<const PaletteModel> model);
  void set_colorizer_model(std::shared_ptr<const ColorizerModel> model);

  void mount(httplib::Server& server);
  /// Binds and serves until stop(). Returns false if the port cannot be bound.
  bool listen();
  /// Binds to an ephemeral port on `host`; serve with listen_after_bind().
  int bind_any_port();
  bool listen_after_bind();
  void stop();

  std::shared_ptr<const PaletteModel> palette_model() const;
  std::shared_ptr<const ColorizerModel> colorizer_model() const;
  ServiceMetrics metrics() const;
  const ServiceConfig& config() const { return config_; }
  const std::filesystem::path& feedback_path() const { return feedback_.path(); }

  struct Session;

 private:
  ServiceConfig config_;
  CategoryVocabulary categories_;
  FeedbackLog feedback_;
  std::unique_ptr<httplib::Server> server_;

  mutable std::mutex model_mutex_;
  std::shared_ptr<const PaletteModel> palette_;
  std::shared_ptr<const ColorizerModel> colorizer_;

  mutable std::mutex session_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;

  mutable std::mutex metrics_mutex_;
  ServiceMetrics metrics_;

  friend struct GatewayHandlers;
};

}  // namespace cys
