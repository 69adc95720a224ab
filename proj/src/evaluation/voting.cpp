#include <cmath>

#include "icaclf/error.hpp"
#include "icaclf/evaluation.hpp"

namespace icaclf::inline ICACLF_ABI {

void VotingSchema::validate() const {
  if (entries.empty()) throw SchemaError("schema " + name + " has no entries");
  double total = 0;
  for (const auto& [model, weight] : entries) {
    if (!(weight > 0) || !std::isfinite(weight)) {
      throw SchemaError("schema " + name + ": weight of " + model + " must be positive");
    }
    total += weight;
  }
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (entries[i].first == entries[j].first) throw SchemaError("schema " + name + " lists " + entries[i].first + " twice");
  if (std::abs(total - 1.0) > 1e-9) {
    throw SchemaError("schema " + name + ": weights sum to " + std::to_string(total) + ", expected 1");
  }
}

VotingSchema schema_from_json(std::string name, const nlohmann::json& j) {
  const nlohmann::json& weights = j.is_object() && j.contains("weights") ? j.at("weights") : j;
  if (!weights.is_object()) throw SchemaError("schema " + name + " must map model ids to weights");
  VotingSchema schema;
  schema.name = j.is_object() && j.contains("name") && j.at("name").is_string() ? j.at("name").get<std::string>()
                                                                                 : std::move(name);
  for (const auto& [model, w] : weights.items()) {
    if (!w.is_number()) throw SchemaError("schema " + schema.name + ": weight of " + model + " is not a number");
    schema.entries.emplace_back(model, w.get<double>());
  }
  schema.validate();
  return schema;
}

nlohmann::json to_json(const VotingSchema& schema) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [model, w] : schema.entries) weights[model] = w;
  return {{"name", schema.name}, {"weights", weights}};
}

const std::vector<VotingSchema>& default_schemas() {
  static const std::vector<VotingSchema> schemas = {
      {"schema1", {{"sm1", 0.5}, {"tm1", 0.25}, {"ps1", 0.25}}},
      {"schema2", {{"sm1", 0.5}, {"tm2", 0.25}, {"ps2", 0.25}}},
      {"schema3", {{"sm2", 0.5}, {"tm2", 0.25}, {"ps2", 0.25}}},
      {"schema4", {{"tm2", 0.5}, {"ps2", 0.5}}},
  };
  return schemas;
}

Vote weighted_vote(std::span<const double> probabilities, const VotingSchema& schema) {
  if (probabilities.size() != schema.entries.size()) {
    throw SchemaError("schema " + schema.name + " has " + std::to_string(schema.entries.size()) + " weights but " +
                      std::to_string(probabilities.size()) + " probabilities were given");
  }
  double p = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (!(probabilities[i] >= 0.0 && probabilities[i] <= 1.0)) {
      throw ContractError("weighted_vote: probability outside [0, 1]");
    }
    p += schema.entries[i].second * probabilities[i];
  }
  return {p, p > schema.threshold};
}

}  // namespace icaclf
