#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "mapprior/tensor.hpp"

namespace mapprior {

class WeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kWeightsFormatVersion = 1;

struct WeightsFile {
  ParameterSet<float> params;
  nlohmann::json config;  // model config stored alongside the tensors
};

/// Blob path for a manifest path: same stem, ".bin" extension.
std::filesystem::path weights_blob_path(const std::filesystem::path& manifest);

/// Writes `<manifest>` (JSON: format_version, config, tensors with name,
/// shape, offset) and the matching little-endian float32 blob.
void save_weights(const std::filesystem::path& manifest, const ParameterSet<float>& params,
                  const nlohmann::json& config = nlohmann::json::object());

WeightsFile load_weights(const std::filesystem::path& manifest);

}  // namespace mapprior
