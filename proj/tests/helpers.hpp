#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "qrw/encoder.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(QRW_TEST_DATA_DIR) / name;
}

inline std::filesystem::path resource_path(const std::string& name) {
  return std::filesystem::path(QRW_RESOURCE_DIR) / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("qrw-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Fills every tensor with uniform noise in [-scale, scale].
inline void randomize(qrw::ModelParams& p, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& t : p.tensors())
    for (Eigen::Index i = 0; i < t.tensor->size(); ++i) t.tensor->data()[i] = u(rng);
}

inline double rel_err(double a, double b) {
  double den = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / den;
}

}  // namespace testing
