#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "stancenet/corpus.hpp"

namespace testing_support {

inline std::filesystem::path source_dir() { return STANCENET_SOURCE_DIR; }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("stancenet-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

inline stancenet::Post post(std::string id, std::string author, std::string description = {},
                            std::set<std::string> tags = {}, std::string transcript = {}) {
  stancenet::Post p;
  p.id = std::move(id);
  p.author = std::move(author);
  p.description = std::move(description);
  p.transcript = std::move(transcript);
  p.hashtags = std::move(tags);
  return p;
}

}  // namespace testing_support
