#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <fmt/format.h>

namespace scratch {

/// Fresh directory under the system temp dir, removed on destruction.
class Dir {
 public:
  explicit Dir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / fmt::format("dream-{}-{:x}", tag, rd());
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~Dir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  Dir(const Dir&) = delete;
  Dir& operator=(const Dir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace scratch
