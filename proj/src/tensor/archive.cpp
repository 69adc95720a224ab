#include "icaclf/archive.hpp"

#include <fstream>
#include <sstream>

#include "icaclf/endian.hpp"
#include "icaclf/error.hpp"

namespace icaclf::inline ICACLF_ABI {

namespace {
constexpr std::string_view kMagic = "ICAPARAM";
}

const Tensor& Archive::at(std::string_view name) const {
  for (const auto& entry : tensors) {
    if (entry.name == name) return entry.tensor;
  }
  throw FormatError("archive has no tensor named '" + std::string(name) + "'");
}

std::string serialize_archive(const Archive& archive) {
  nlohmann::json manifest;
  manifest["format_version"] = kArchiveFormatVersion;
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& entry : archive.tensors) {
    manifest["tensors"].push_back(
        {{"name", entry.name}, {"shape", entry.tensor.shape()}, {"offset", offset}, {"count", entry.tensor.size()}});
    offset += entry.tensor.size();
  }
  manifest["metadata"] = archive.metadata;
  const std::string text = manifest.dump();

  std::string out(kMagic);
  le::append<std::uint32_t>(out, kArchiveFormatVersion);
  le::append<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset * sizeof(float));
  for (const auto& entry : archive.tensors) {
    for (real v : entry.tensor.data()) le::append<float>(out, static_cast<float>(v));
  }
  return out;
}

Archive parse_archive(std::string_view bytes) {
  le::Reader reader(bytes);
  if (bytes.size() < kMagic.size() || reader.take(kMagic.size()) != kMagic) {
    throw FormatError("not a parameter archive (bad magic)");
  }
  const auto version = reader.read<std::uint32_t>();
  if (version != kArchiveFormatVersion) {
    throw VersionError("parameter archive version " + std::to_string(version) + " is not supported");
  }
  const auto manifest_size = reader.read<std::uint64_t>();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(reader.take(manifest_size));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("corrupt archive manifest: ") + e.what());
  }
  Archive archive;
  archive.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& entry : manifest.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (numel(shape) != count) throw FormatError("archive tensor count does not match its shape");
    std::vector<real> values(count);
    for (auto& v : values) v = static_cast<real>(reader.read<float>());
    archive.tensors.push_back({entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values))});
  }
  if (reader.remaining() != 0) throw FormatError("trailing bytes after archive payload");
  return archive;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  write_file(path, serialize_archive(archive));
}

Archive read_archive(const std::filesystem::path& path) { return parse_archive(read_file(path)); }

}  // namespace icaclf
