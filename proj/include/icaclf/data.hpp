#pragma once

#include "icaclf/config.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace icaclf::inline ICACLF_ABI {

using Grid = std::array<std::size_t, 3>;

enum Label : std::uint8_t { kSignal = 0, kArtifact = 1 };

/// One ICA component. Stored values are already standardized; the power
/// spectrum is derived from the timecourse.
struct ComponentRecord {
  std::string subject_id;
  std::int32_t component_id = 0;
  std::uint8_t label = kSignal;
  std::vector<float> spatial_map;     // grid[0] * grid[1] * grid[2], row-major
  std::vector<float> timecourse;      // T
  std::vector<float> power_spectrum;  // T / 2

  bool operator==(const ComponentRecord&) const = default;
};

struct Dataset {
  Grid grid{45, 54, 45};
  std::size_t timepoints = 1200;
  std::vector<ComponentRecord> records;

  std::size_t spectrum_length() const { return timepoints / 2; }
  std::size_t voxels() const { return grid[0] * grid[1] * grid[2]; }
  // Throws FormatError when a record disagrees with the dataset geometry.
  void check_consistency() const;
  std::vector<std::string> subjects() const;  // sorted, unique

  bool operator==(const Dataset&) const = default;
};

/// (x - mean) / std with the population standard deviation. Throws
/// DegenerateInputError for constant input or fewer than two values.
std::vector<double> standardize(std::span<const double> values);
std::vector<float> standardize(std::span<const float> values);

/// Periodogram |DFT(standardize(x))_k|^2 / T for k = 1 .. T/2 (DC dropped).
/// Throws DegenerateInputError for constant input or T < 4.
std::vector<double> power_spectrum(std::span<const double> timecourse);
std::vector<float> power_spectrum(std::span<const float> timecourse);

// ---------------------------------------------------------------------------
// Synthetic components

struct SynthConfig {
  std::size_t n_subjects = 394;
  std::size_t components_per_subject = 20;
  Grid grid{45, 54, 45};
  std::size_t timepoints = 1200;
  double artifact_fraction = 0.7;
  double noise_level = 0.5;
  std::uint64_t seed = 0;

  void validate() const;  // throws ParameterError
};

nlohmann::json to_json(const SynthConfig& config);
// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j);

enum class SpatialArtifact { rim, speckle, slice_band };
enum class TemporalArtifact { spike_train, high_frequency, sawtooth_drift };

/// Artifact sub-types chosen for a generated component (meaningless for
/// signal components). Exposed so tests can stratify by construction.
struct ArtifactKinds {
  SpatialArtifact spatial = SpatialArtifact::rim;
  TemporalArtifact temporal = TemporalArtifact::spike_train;
};

Dataset generate_synthetic(const SynthConfig& config, std::vector<ArtifactKinds>* kinds = nullptr);

// ---------------------------------------------------------------------------
// Subject-level folds

struct SplitConfig {
  std::size_t n_train_subjects = 80;
  std::size_t n_val_subjects = 20;
  std::size_t n_folds = 5;
  std::uint64_t seed = 0;
};

/// Record indices refer to Dataset::records.
struct FoldPlan {
  std::size_t fold_index = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> val_subjects;
  std::vector<std::string> test_subjects;
  std::vector<std::size_t> train_records;
  std::vector<std::size_t> val_records;
  std::vector<std::size_t> test_records;
  // Training records after undersampling the majority class.
  std::vector<std::size_t> balanced_train_records;
};

/// The test subjects are fixed for all folds; the remaining train+val pool
/// rotates so that each fold validates on a different block of subjects.
std::vector<FoldPlan> split_folds(const Dataset& dataset, const SplitConfig& config);

// ---------------------------------------------------------------------------
// Dataset file

/// Layout: magic "ICACOMP1", u32 version, u32 header length, JSON header
/// (version, grid, timepoints, spectrum length, record count), records, u32
/// CRC-32 of every byte after the magic. Record: u16 subject id length, id
/// bytes, i32 component id, u8 label, float32 map, timecourse, spectrum.
/// Everything little-endian.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view bytes);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

std::uint64_t dataset_hash(const Dataset& dataset);

}  // namespace icaclf
