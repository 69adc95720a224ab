#include <cmath>
#include <cstdio>

#include "icaclf/error.hpp"
#include "icaclf/evaluation.hpp"

namespace icaclf::inline ICACLF_ABI {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return double(num) / double(den);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("undefined");
}

std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "undefined") throw FormatError("metric value must be a number or \"undefined\"");
    return std::nullopt;
  }
  return j.get<double>();
}

}  // namespace

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  m.acc = ratio(tp + tn, tp + tn + fp + fn);
  m.sen = ratio(tp, tp + fn);
  m.prec = ratio(tp, tp + fp);
  m.spec = ratio(tn, tn + fp);
  return m;
}

Metrics compute_metrics(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                        double threshold) {
  if (probabilities.empty()) throw ContractError("compute_metrics: no records");
  if (probabilities.size() != labels.size()) {
    throw ContractError("compute_metrics: " + std::to_string(probabilities.size()) + " probabilities for " +
                        std::to_string(labels.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probabilities[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("compute_metrics: probability outside [0, 1]");
    if (labels[i] > 1) throw ContractError("compute_metrics: label outside {0, 1}");
    const bool predicted = p > threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

nlohmann::json to_json(const Metrics& m) {
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn},
          {"acc", optional_json(m.acc)},
          {"sen", optional_json(m.sen)},
          {"prec", optional_json(m.prec)},
          {"spec", optional_json(m.spec)}};
}

Metrics metrics_from_json(const nlohmann::json& j) {
  try {
    Metrics m;
    m.tp = j.at("tp").get<std::size_t>();
    m.fp = j.at("fp").get<std::size_t>();
    m.tn = j.at("tn").get<std::size_t>();
    m.fn = j.at("fn").get<std::size_t>();
    m.acc = optional_from_json(j.at("acc"));
    m.sen = optional_from_json(j.at("sen"));
    m.prec = optional_from_json(j.at("prec"));
    m.spec = optional_from_json(j.at("spec"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metrics: ") + e.what());
  }
}

MeanMetrics mean_over_folds(std::span<const Metrics> folds) {
  MeanMetrics out;
  if (folds.empty()) return out;
  auto mean = [&](std::optional<double> Metrics::*field) -> std::optional<double> {
    double total = 0;
    for (const auto& m : folds) {
      if (!(m.*field)) return std::nullopt;
      total += *(m.*field);
    }
    return total / double(folds.size());
  };
  out.acc = mean(&Metrics::acc);
  out.sen = mean(&Metrics::sen);
  out.prec = mean(&Metrics::prec);
  out.spec = mean(&Metrics::spec);
  return out;
}

namespace {

nlohmann::json rows_json(const std::vector<ResultRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& m : r.folds) folds.push_back(to_json(m));
    out.push_back({{"name", r.name},
                   {"folds", folds},
                   {"mean",
                    {{"acc", optional_json(r.mean.acc)},
                     {"sen", optional_json(r.mean.sen)},
                     {"prec", optional_json(r.mean.prec)},
                     {"spec", optional_json(r.mean.spec)}}}});
  }
  return out;
}

std::vector<ResultRow> rows_from_json(const nlohmann::json& j) {
  std::vector<ResultRow> rows;
  for (const auto& r : j) {
    ResultRow row;
    row.name = r.at("name").get<std::string>();
    for (const auto& m : r.at("folds")) row.folds.push_back(metrics_from_json(m));
    const auto& mean = r.at("mean");
    row.mean.acc = optional_from_json(mean.at("acc"));
    row.mean.sen = optional_from_json(mean.at("sen"));
    row.mean.prec = optional_from_json(mean.at("prec"));
    row.mean.spec = optional_from_json(mean.at("spec"));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const EvaluationResults& results) {
  return {{"single_models", rows_json(results.single_models)},
          {"combined_models", rows_json(results.combined_models)},
          {"schemas", rows_json(results.schemas)}};
}

EvaluationResults evaluation_results_from_json(const nlohmann::json& j) {
  try {
    EvaluationResults r;
    r.single_models = rows_from_json(j.at("single_models"));
    r.combined_models = rows_from_json(j.at("combined_models"));
    r.schemas = rows_from_json(j.at("schemas"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed evaluation results: ") + e.what());
  }
}

std::string format_percent(const std::optional<double>& ratio) {
  if (!ratio) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *ratio * 100.0);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

std::string format_row(const std::string& name, const MeanMetrics& mean) {
  return name + " " + format_percent(mean.acc) + " " + format_percent(mean.sen) + " " + format_percent(mean.prec) +
         " " + format_percent(mean.spec);
}

}  // namespace icaclf
