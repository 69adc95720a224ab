#pragma once

#include "icaclf/config.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "icaclf/tensor.hpp"

namespace icaclf::inline ICACLF_ABI {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Parameter archive: magic "ICAPARAM", u32 format version, u64 manifest
/// length, a JSON manifest (format version, tensor names/shapes/offsets in
/// layer order, free-form metadata) and then every tensor as consecutive
/// little-endian float32 arrays.
inline constexpr std::uint32_t kArchiveFormatVersion = 1;

struct Archive {
  std::vector<NamedTensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  const Tensor& at(std::string_view name) const;
};

std::string serialize_archive(const Archive& archive);
Archive parse_archive(std::string_view bytes);

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace icaclf
