#pragma once

#include "icaclf/config.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "icaclf/data.hpp"

namespace icaclf::inline ICACLF_ABI {

struct RunResult;

/// Confusion counts with artifact as the positive class. A ratio whose
/// denominator is zero is left empty rather than reported as 0 or 1.
struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> acc, sen, prec, spec;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Metrics&) const = default;
};

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

/// Prediction is artifact iff probability > threshold. Throws ContractError
/// for empty or mismatched input and probabilities outside [0, 1].
Metrics compute_metrics(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                        double threshold = 0.5);

nlohmann::json to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

struct VotingSchema {
  std::string name;
  std::vector<std::pair<std::string, double>> entries;  // (model id, weight)
  double threshold = 0.5;

  /// Weights must be positive and sum to 1 within 1e-9; throws SchemaError.
  void validate() const;
};

/// Accepts {"weights": {"sm1": 0.5, ...}} or a bare {"sm1": 0.5, ...} map.
/// Entries keep the JSON key order (alphabetical).
VotingSchema schema_from_json(std::string name, const nlohmann::json& j);
nlohmann::json to_json(const VotingSchema& schema);

/// schema1..schema4: {sm1 .5, tm1 .25, ps1 .25}, {sm1 .5, tm2 .25, ps2 .25},
/// {sm2 .5, tm2 .25, ps2 .25}, {tm2 .5, ps2 .5}.
const std::vector<VotingSchema>& default_schemas();

struct Vote {
  double probability = 0;
  bool artifact = false;
};

/// Weighted sum of per-model probabilities, one per schema entry in order.
Vote weighted_vote(std::span<const double> probabilities, const VotingSchema& schema);

/// Arithmetic mean over folds of each ratio; empty if any fold leaves the
/// ratio undefined.
struct MeanMetrics {
  std::optional<double> acc, sen, prec, spec;
  bool operator==(const MeanMetrics&) const = default;
};

MeanMetrics mean_over_folds(std::span<const Metrics> folds);

struct ResultRow {
  std::string name;
  std::vector<Metrics> folds;
  MeanMetrics mean;
  bool operator==(const ResultRow&) const = default;
};

struct EvaluationResults {
  std::vector<ResultRow> single_models;
  std::vector<ResultRow> combined_models;
  std::vector<ResultRow> schemas;
  bool operator==(const EvaluationResults&) const = default;
};

nlohmann::json to_json(const EvaluationResults& results);
EvaluationResults evaluation_results_from_json(const nlohmann::json& j);

/// Test-set probabilities of each model, per fold: predictions[model][fold].
struct FoldPredictions {
  std::vector<std::size_t> records;
  std::vector<std::uint8_t> labels;
  std::vector<std::pair<std::string, std::vector<std::vector<double>>>> models;

  const std::vector<std::vector<double>>& of(const std::string& model_id) const;  // throws EvaluationError
  std::size_t n_folds() const;
};

/// Returns serialized archive bytes for (model id, fold), or nothing.
using ArchiveSource = std::function<std::optional<std::string>(const std::string&, std::size_t)>;
/// Reads <dir>/<model>/fold_<k>.icap.
ArchiveSource directory_archives(std::filesystem::path dir);
ArchiveSource memory_archives(std::span<const RunResult> results);

/// Runs every model of every fold over the test records. Throws
/// EvaluationError naming the model and fold when an archive is missing.
FoldPredictions predict_folds(const Dataset& dataset, std::span<const std::size_t> test_records,
                              std::span<const std::string> model_ids, std::size_t n_folds,
                              const ArchiveSource& archives);

/// Metrics for each model and each schema whose models all have predictions;
/// schemas naming an unknown model raise EvaluationError.
EvaluationResults evaluate_predictions(const FoldPredictions& predictions, std::span<const VotingSchema> schemas);

EvaluationResults evaluate_models(const Dataset& dataset, std::span<const std::size_t> test_records,
                                  std::span<const std::string> model_ids, std::size_t n_folds,
                                  std::span<const VotingSchema> schemas, const ArchiveSource& archives);

void write_predictions(const std::filesystem::path& path, const FoldPredictions& predictions);
FoldPredictions read_predictions(const std::filesystem::path& path);

/// Percentage with two decimals and trailing zeros dropped (0.969 -> "96.9");
/// "undefined" for an empty value.
std::string format_percent(const std::optional<double>& ratio);
std::string format_row(const std::string& name, const MeanMetrics& mean);

/// Table with columns ACC SEN PREC SPEC, one section per non-empty group.
std::string render_table(const EvaluationResults& results);

/// Writes report.txt, metrics.json and per_fold/<name>.csv under dir.
void emit_report(const EvaluationResults& results, const std::filesystem::path& dir);

}  // namespace icaclf
