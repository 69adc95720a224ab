#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "icaclf/archive.hpp"
#include "icaclf/error.hpp"
#include "icaclf/evaluation.hpp"
#include "icaclf/model.hpp"
#include "icaclf/training.hpp"

namespace icaclf::inline ICACLF_ABI {

const std::vector<std::vector<double>>& FoldPredictions::of(const std::string& model_id) const {
  for (const auto& [id, folds] : models)
    if (id == model_id) return folds;
  throw EvaluationError("no predictions for model " + model_id);
}

std::size_t FoldPredictions::n_folds() const { return models.empty() ? 0 : models.front().second.size(); }

ArchiveSource directory_archives(std::filesystem::path dir) {
  return [dir = std::move(dir)](const std::string& model, std::size_t fold) -> std::optional<std::string> {
    const auto path = dir / model / ("fold_" + std::to_string(fold) + ".icap");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_file(path);
  };
}

ArchiveSource memory_archives(std::span<const RunResult> results) {
  std::vector<RunResult> copy(results.begin(), results.end());
  return [copy = std::move(copy)](const std::string& model, std::size_t fold) -> std::optional<std::string> {
    for (const auto& r : copy)
      if (r.model_id == model && r.fold_index == fold) return r.archive_bytes;
    return std::nullopt;
  };
}

FoldPredictions predict_folds(const Dataset& dataset, std::span<const std::size_t> test_records,
                              std::span<const std::string> model_ids, std::size_t n_folds,
                              const ArchiveSource& archives) {
  if (test_records.empty()) throw EvaluationError("test set is empty");
  FoldPredictions out;
  out.records.assign(test_records.begin(), test_records.end());
  for (auto i : test_records) out.labels.push_back(dataset.records.at(i).label);
  for (const auto& id : model_ids) {
    std::vector<std::vector<double>> folds;
    for (std::size_t k = 0; k < n_folds; ++k) {
      const auto bytes = archives(id, k);
      if (!bytes) throw EvaluationError("missing archive for model " + id + ", fold " + std::to_string(k));
      Model model = [&] {
        try {
          return Model::from_archive(parse_archive(*bytes));
        } catch (const Error& e) {
          throw EvaluationError("cannot load archive for model " + id + ", fold " + std::to_string(k) + ": " +
                                e.what());
        }
      }();
      folds.push_back(predict(model, dataset, test_records));
    }
    out.models.emplace_back(id, std::move(folds));
  }
  return out;
}

EvaluationResults evaluate_predictions(const FoldPredictions& predictions, std::span<const VotingSchema> schemas) {
  EvaluationResults results;
  const auto& combined = combined_model_ids();
  for (const auto& [id, folds] : predictions.models) {
    ResultRow row{id, {}, {}};
    for (const auto& p : folds) row.folds.push_back(compute_metrics(p, predictions.labels));
    row.mean = mean_over_folds(row.folds);
    const bool is_combined = std::find(combined.begin(), combined.end(), id) != combined.end();
    (is_combined ? results.combined_models : results.single_models).push_back(std::move(row));
  }
  for (const auto& schema : schemas) {
    schema.validate();
    std::vector<const std::vector<std::vector<double>>*> members;
    for (const auto& [model, weight] : schema.entries) {
      try {
        members.push_back(&predictions.of(model));
      } catch (const EvaluationError&) {
        throw EvaluationError("schema " + schema.name + " needs model " + model + ", which was not evaluated");
      }
    }
    ResultRow row{schema.name, {}, {}};
    std::vector<double> per_model(members.size());
    for (std::size_t k = 0; k < predictions.n_folds(); ++k) {
      std::vector<double> voted(predictions.labels.size());
      for (std::size_t i = 0; i < voted.size(); ++i) {
        for (std::size_t m = 0; m < members.size(); ++m) per_model[m] = (*members[m])[k][i];
        voted[i] = weighted_vote(per_model, schema).probability;
      }
      // Thresholding the voted probability at the schema threshold matches
      // the vote decision.
      row.folds.push_back(compute_metrics(voted, predictions.labels, schema.threshold));
    }
    row.mean = mean_over_folds(row.folds);
    results.schemas.push_back(std::move(row));
  }
  return results;
}

EvaluationResults evaluate_models(const Dataset& dataset, std::span<const std::size_t> test_records,
                                  std::span<const std::string> model_ids, std::size_t n_folds,
                                  std::span<const VotingSchema> schemas, const ArchiveSource& archives) {
  std::vector<std::string> needed(model_ids.begin(), model_ids.end());
  for (const auto& s : schemas)
    for (const auto& [model, w] : s.entries)
      if (std::find(needed.begin(), needed.end(), model) == needed.end()) needed.push_back(model);
  return evaluate_predictions(predict_folds(dataset, test_records, needed, n_folds, archives), schemas);
}

void write_predictions(const std::filesystem::path& path, const FoldPredictions& predictions) {
  std::ostringstream out;
  out << "record,label";
  for (const auto& [id, folds] : predictions.models)
    for (std::size_t k = 0; k < folds.size(); ++k) out << ',' << id << '@' << k;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < predictions.records.size(); ++i) {
    out << predictions.records[i] << ',' << int(predictions.labels[i]);
    for (const auto& [id, folds] : predictions.models)
      for (const auto& p : folds) {
        std::snprintf(buf, sizeof buf, ",%.17g", p[i]);
        out << buf;
      }
    out << '\n';
  }
  write_file(path, out.str());
}

FoldPredictions read_predictions(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError("predictions file is empty: " + path.string());
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "record" || header[1] != "label") {
    throw FormatError("predictions file has an unexpected header: " + path.string());
  }
  FoldPredictions out;
  std::vector<std::pair<std::size_t, std::size_t>> columns;  // (model slot, fold)
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto at = header[c].rfind('@');
    if (at == std::string::npos) throw FormatError("bad predictions column: " + header[c]);
    const std::string id = header[c].substr(0, at);
    const std::size_t fold = std::stoul(header[c].substr(at + 1));
    std::size_t slot = 0;
    while (slot < out.models.size() && out.models[slot].first != id) ++slot;
    if (slot == out.models.size()) out.models.emplace_back(id, std::vector<std::vector<double>>{});
    auto& folds = out.models[slot].second;
    if (fold != folds.size()) throw FormatError("predictions columns out of order at " + header[c]);
    folds.emplace_back();
    columns.emplace_back(slot, fold);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw FormatError("predictions row has the wrong column count");
    try {
      out.records.push_back(std::stoul(cells[0]));
      out.labels.push_back(static_cast<std::uint8_t>(std::stoi(cells[1])));
      for (std::size_t c = 2; c < cells.size(); ++c) {
        out.models[columns[c - 2].first].second[columns[c - 2].second].push_back(std::stod(cells[c]));
      }
    } catch (const std::logic_error&) {
      throw FormatError("predictions row is not numeric: " + line.substr(0, 40));
    }
  }
  return out;
}

std::string render_table(const EvaluationResults& results) {
  std::string out;
  auto section = [&](const char* title, const std::vector<ResultRow>& rows) {
    if (rows.empty()) return;
    if (!out.empty()) out += '\n';
    out += std::string(title) + "\nmodel ACC SEN PREC SPEC\n";
    for (const auto& r : rows) out += format_row(r.name, r.mean) + '\n';
  };
  section("Single models", results.single_models);
  section("Combined models", results.combined_models);
  section("Voting schemas", results.schemas);
  return out;
}

void emit_report(const EvaluationResults& results, const std::filesystem::path& dir) {
  write_file(dir / "report.txt", render_table(results));
  write_file(dir / "metrics.json", to_json(results).dump(2) + "\n");
  for (const auto* rows : {&results.single_models, &results.combined_models, &results.schemas}) {
    for (const auto& r : *rows) {
      std::string csv = "fold,acc,sen,prec,spec,tp,fp,tn,fn\n";
      for (std::size_t k = 0; k < r.folds.size(); ++k) {
        const auto& m = r.folds[k];
        csv += std::to_string(k) + ',' + format_percent(m.acc) + ',' + format_percent(m.sen) + ',' +
               format_percent(m.prec) + ',' + format_percent(m.spec) + ',' + std::to_string(m.tp) + ',' +
               std::to_string(m.fp) + ',' + std::to_string(m.tn) + ',' + std::to_string(m.fn) + '\n';
      }
      write_file(dir / "per_fold" / (r.name + ".csv"), csv);
    }
  }
}

}  // namespace icaclf
