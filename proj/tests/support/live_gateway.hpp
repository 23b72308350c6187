#pragma once

#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <thread>

// Eigen before httplib: <resolv.h> defines a `_res` macro.
#include "cyscolor/image.hpp"
#include "cyscolor/service.hpp"

#include <httplib.h>

namespace live {

inline std::filesystem::path temp_dir(const std::string& tag) {
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() / ("cys-" + tag + "-" + std::to_string(rd()));
  std::filesystem::create_directories(dir);
  return dir;
}

// Gateway bound to an ephemeral port and served from a background thread.
class Server {
 public:
  explicit Server(cys::ServiceConfig config) : gateway_(std::move(config)) {}
  ~Server() {
    gateway_.stop();
    if (thread_.joinable()) thread_.join();
  }

  cys::Gateway& gateway() { return gateway_; }

  void start() {
    port_ = gateway_.bind_any_port();
    thread_ = std::thread([this] { gateway_.listen_after_bind(); });
    httplib::Client c = client();
    for (int i = 0; i < 200; ++i) {
      if (auto r = c.Get("/v1/health")) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  int port() const { return port_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

 private:
  cys::Gateway gateway_;
  std::thread thread_;
  int port_ = 0;
};

// Horizontal gradient PNG, width x height, 8 bit.
inline std::string gradient_png(int width, int height) {
  cys::RgbImage img(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = (x + 0.5) / width;
      img.set_pixel(y, x, {t, 0.3 + 0.4 * t, 1.0 - t});
    }
  }
  const auto bytes = cys::encode_png(img, 8);
  return {bytes.begin(), bytes.end()};
}

// Bit depth byte from the IHDR chunk.
inline int png_bit_depth(const std::string& png) {
  return png.size() > 24 ? static_cast<unsigned char>(png[24]) : -1;
}

inline cys::RgbImage decode(const std::string& bytes) {
  return cys::decode_image({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
}

}  // namespace live
