#include <zlib.h>

#include <algorithm>
#include <cstring>

#include "icaclf/archive.hpp"
#include "icaclf/data.hpp"
#include "icaclf/endian.hpp"
#include "icaclf/error.hpp"
#include "icaclf/hash.hpp"

namespace icaclf::inline ICACLF_ABI {

namespace {

constexpr std::string_view kMagic = "ICACOMP1";

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes 32-bit lengths; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t pos = 0; pos < bytes.size(); pos += kChunk) {
    const auto n = std::min(kChunk, bytes.size() - pos);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

void append_floats(std::string& out, const std::vector<float>& values) {
  for (float v : values) le::append(out, v);
}

std::vector<float> read_floats(le::Reader& in, std::size_t n) {
  const auto bytes = in.take(n * sizeof(float));
  std::vector<float> out(n);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  for (auto& v : out) v = le::byteswap_if_big(v);
  return out;
}

}  // namespace

std::string serialize_dataset(const Dataset& dataset) {
  dataset.check_consistency();
  const nlohmann::json header = {{"version", kDatasetFormatVersion},
                                 {"grid", dataset.grid},
                                 {"timepoints", dataset.timepoints},
                                 {"spectrum_length", dataset.spectrum_length()},
                                 {"records", dataset.records.size()}};
  const std::string header_text = header.dump();
  std::string out(kMagic);
  le::append<std::uint32_t>(out, kDatasetFormatVersion);
  le::append<std::uint32_t>(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  const std::size_t per_record = sizeof(float) * (dataset.voxels() + dataset.timepoints + dataset.spectrum_length());
  out.reserve(out.size() + dataset.records.size() * (per_record + 32) + 4);
  for (const auto& r : dataset.records) {
    if (r.subject_id.size() > 0xffff) throw FormatError("subject id too long: " + r.subject_id.substr(0, 32));
    le::append<std::uint16_t>(out, static_cast<std::uint16_t>(r.subject_id.size()));
    out += r.subject_id;
    le::append<std::int32_t>(out, r.component_id);
    le::append<std::uint8_t>(out, r.label);
    append_floats(out, r.spatial_map);
    append_floats(out, r.timecourse);
    append_floats(out, r.power_spectrum);
  }
  le::append<std::uint32_t>(out, crc32_of(std::string_view(out).substr(kMagic.size())));
  return out;
}

Dataset parse_dataset(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("not a component dataset (bad magic)");
  }
  le::Reader in(bytes.substr(kMagic.size()));
  const auto version = in.read<std::uint32_t>();
  if (version != kDatasetFormatVersion) {
    throw VersionError("dataset format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kDatasetFormatVersion) + ")");
  }
  const auto header_len = in.read<std::uint32_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.take(header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("dataset header is not valid JSON: ") + e.what());
  }
  Dataset dataset;
  std::size_t count = 0;
  try {
    dataset.grid = header.at("grid").get<Grid>();
    dataset.timepoints = header.at("timepoints").get<std::size_t>();
    count = header.at("records").get<std::size_t>();
    if (header.at("spectrum_length").get<std::size_t>() != dataset.spectrum_length()) {
      throw FormatError("dataset header spectrum length disagrees with timepoints");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header is malformed: ") + e.what());
  }
  const std::size_t min_record = 2 + 4 + 1;
  if (count > in.remaining() / min_record) throw TruncationError("dataset declares more records than the file holds");
  dataset.records.resize(count);
  for (auto& r : dataset.records) {
    const auto id_len = in.read<std::uint16_t>();
    r.subject_id = std::string(in.take(id_len));
    r.component_id = in.read<std::int32_t>();
    r.label = in.read<std::uint8_t>();
    r.spatial_map = read_floats(in, dataset.voxels());
    r.timecourse = read_floats(in, dataset.timepoints);
    r.power_spectrum = read_floats(in, dataset.spectrum_length());
  }
  const std::size_t body_end = kMagic.size() + in.position();
  if (in.remaining() < 4) throw TruncationError("dataset file is missing its checksum");
  if (in.remaining() > 4) throw FormatError("dataset file has trailing bytes after the records");
  const auto stored = in.read<std::uint32_t>();
  if (stored != crc32_of(bytes.substr(kMagic.size(), body_end - kMagic.size()))) {
    throw ChecksumError("dataset checksum mismatch");
  }
  dataset.check_consistency();
  return dataset;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file(path, serialize_dataset(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

std::uint64_t dataset_hash(const Dataset& dataset) {
  Fnv1a h;
  for (auto g : dataset.grid) h.update_value(std::uint64_t(g));
  h.update_value(std::uint64_t(dataset.timepoints));
  for (const auto& r : dataset.records) {
    h.update(r.subject_id);
    h.update_value(r.component_id);
    h.update_value(r.label);
    h.update(r.spatial_map.data(), r.spatial_map.size() * sizeof(float));
    h.update(r.timecourse.data(), r.timecourse.size() * sizeof(float));
    h.update(r.power_spectrum.data(), r.power_spectrum.size() * sizeof(float));
  }
  return h.digest();
}

}  // namespace icaclf
