#pragma once

#include "icaclf/config.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "icaclf/data.hpp"
#include "icaclf/model.hpp"

namespace icaclf::inline ICACLF_ABI {

struct TrainConfig {
  std::string model_id;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t patience = 4;
  std::size_t max_epochs = 50;
  std::uint64_t seed = 0;

  /// Batch size 16 and patience 3 for models with a spatial input only,
  /// 128 and 4 for everything else.
  static TrainConfig defaults_for(const std::string& model_id, std::uint64_t seed = 0);
  void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const TrainConfig& config);

struct RunResult {
  std::string model_id;
  std::size_t fold_index = 0;
  std::vector<double> train_loss;    // per epoch, mean over records
  std::vector<double> val_accuracy;  // per epoch
  std::size_t stopped_epoch = 0;     // epochs actually run
  std::size_t best_epoch = 0;        // 1-based
  double best_val_accuracy = 0;
  double restored_val_accuracy = 0;  // re-measured after restoring the snapshot
  std::string archive_bytes;         // serialized best snapshot
  std::uint64_t archive_hash = 0;
  std::filesystem::path archive_path;  // set by run_cv when writing to disk
  std::vector<std::size_t> visited_records;  // sorted, unique
};

nlohmann::json to_json(const RunResult& result);

/// Canonical architecture sized for the dataset's grid and timecourse length.
ModelConfig model_config_for(const std::string& model_id, const Dataset& dataset);

/// Resolves a model for the dataset: the entry for model_id in
/// `architectures` (ModelConfig JSON whose input extents may be omitted) when
/// present, the canonical architecture otherwise. Throws ConfigError.
ModelConfig model_config_for(const std::string& model_id, const Dataset& dataset,
                             const nlohmann::json& architectures);

/// Stacks the requested records into model inputs, filling only the domains
/// the model consumes.
ModelInputs gather_inputs(const Dataset& dataset, std::span<const std::size_t> records,
                          const std::set<Domain>& domains);
Tensor gather_labels(const Dataset& dataset, std::span<const std::size_t> records);

/// Artifact probabilities in eval mode, without recording gradients.
std::vector<double> predict(Model& model, const Dataset& dataset, std::span<const std::size_t> records,
                            std::size_t batch_size = 64);

double accuracy(std::span<const double> probabilities, const Dataset& dataset, std::span<const std::size_t> records);

/// Splits shuffled indices into batches; a trailing batch of one record is
/// folded into the previous batch because batch norm cannot train on it.
std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size);

/// Trains on the fold's balanced training records with early stopping on
/// validation accuracy and returns the restored best snapshot. Throws
/// ProtocolError if the balanced set is empty or a test record is touched.
RunResult run_training(const Dataset& dataset, const FoldPlan& fold, const TrainConfig& config);
RunResult run_training(const Dataset& dataset, const FoldPlan& fold, const TrainConfig& config,
                       const ModelConfig& model_config);

struct CvConfig {
  SplitConfig split;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_epochs;  // overrides the default cap
  std::optional<std::filesystem::path> out_dir;
  std::size_t jobs = 1;
  // Per-model architecture overrides, see model_config_for.
  nlohmann::json architectures = nlohmann::json::object();
  // Called once per finished run, serialized across workers.
  std::function<void(const RunResult&)> on_result;
};

/// Seed of one (model, fold) run derived from the master seed.
std::uint64_t run_seed(std::uint64_t master, const std::string& model_id, std::size_t fold);

/// One RunResult per (model, fold), ordered by model then fold. With an
/// output directory, archives go to <out>/<model>/fold_<k>.icap and a
/// manifest.json lists them with their hashes.
std::vector<RunResult> run_cv(const Dataset& dataset, std::span<const std::string> model_ids, const CvConfig& config);

nlohmann::json cv_manifest(std::span<const RunResult> results, const CvConfig& config);

}  // namespace icaclf
