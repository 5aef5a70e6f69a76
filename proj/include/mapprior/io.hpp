#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mapprior {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace mapprior
