#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "sizer/gmid_lut.hpp"
#include "sizer/kv.hpp"
#include "sizer/netlist.hpp"

namespace testing_support {

inline std::filesystem::path data(const std::string& name) {
  return std::filesystem::path(SIZER_TEST_DATA) / name;
}

inline std::string read_data(const std::string& name) { return sizer::kv::read_text(data(name)); }

inline sizer::NetlistDoc netlist(const std::string& name) {
  return sizer::parse_netlist(read_data(name));
}

inline const sizer::LutSet& default_luts() {
  static const sizer::LutSet luts = sizer::LutSet::build(sizer::DeviceModel{}, sizer::kAllCorners);
  return luts;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sizer-test-" + tag + "-" + std::to_string(rd()));
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

}  // namespace testing_support
