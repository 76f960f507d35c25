#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "tasign/ingest.hpp"
#include "tasign/rng.hpp"

namespace tasign::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tasign_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline RawSignature signature_from(const std::vector<PenSample>& samples) {
  RawSignature sig;
  sig.samples = samples;
  sig.user_id = "u";
  return sig;
}

/// A random pen trajectory with T samples, pen down throughout.
inline RawSignature random_signature(Rng& rng, int T) {
  RawSignature sig;
  sig.user_id = "u";
  std::int64_t x = 5000, y = 5000;
  for (int i = 0; i < T; ++i) {
    x += rng.uniform_int(-40, 40);
    y += rng.uniform_int(-40, 40);
    sig.samples.push_back({10 * i, x, y, rng.uniform_int(1, 1023), true});
  }
  return sig;
}

}  // namespace tasign::testing
