#include "mapprior/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "mapprior/io.hpp"

namespace mapprior {

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace

std::filesystem::path weights_blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

void save_weights(const std::filesystem::path& manifest, const ParameterSet<float>& params,
                  const nlohmann::json& config) {
  nlohmann::json j;
  j["format_version"] = kWeightsFormatVersion;
  j["dtype"] = "float32-le";
  j["config"] = config;
  j["blob"] = weights_blob_path(manifest).filename().string();
  j["tensors"] = nlohmann::json::array();
  std::string blob;
  blob.reserve(params.total_size() * 4);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto id = static_cast<ParamId>(i);
    const Tensor<float>& t = params.value(id);
    j["tensors"].push_back({{"name", params.name(id)}, {"shape", t.shape()}, {"offset", offset}});
    for (float v : t.data()) {
      const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
      char bytes[4];
      std::memcpy(bytes, &bits, 4);
      blob.append(bytes, 4);
    }
    offset += t.size();
  }
  j["total_values"] = offset;
  write_file_atomic(weights_blob_path(manifest), blob);
  write_file_atomic(manifest, j.dump(2) + "\n");
}

WeightsFile load_weights(const std::filesystem::path& manifest) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw WeightsError("weights manifest " + manifest.string() + ": " + e.what());
  }
  if (j.value("format_version", -1) != kWeightsFormatVersion)
    throw WeightsError("weights manifest " + manifest.string() + ": unsupported format_version");
  const auto blob_path = manifest.parent_path() / j.at("blob").get<std::string>();
  const std::string blob = read_file(blob_path);
  const std::size_t total = j.at("total_values").get<std::size_t>();
  if (blob.size() != total * 4)
    throw WeightsError("weights blob " + blob_path.string() + ": expected " + std::to_string(total * 4) +
                       " bytes, found " + std::to_string(blob.size()));
  WeightsFile out;
  out.config = j.value("config", nlohmann::json::object());
  for (const auto& t : j.at("tensors")) {
    auto shape = t.at("shape").get<std::vector<int>>();
    const std::size_t offset = t.at("offset").get<std::size_t>();
    const std::size_t n = Tensor<float>::count(shape);
    if (offset + n > total) throw WeightsError("weights tensor '" + t.at("name").get<std::string>() + "' out of range");
    std::vector<float> data(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits;
      std::memcpy(&bits, blob.data() + (offset + k) * 4, 4);
      data[k] = std::bit_cast<float>(to_little(bits));
    }
    out.params.add(t.at("name").get<std::string>(), Tensor<float>(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace mapprior
