#include <algorithm>
#include <map>

#include "icaclf/error.hpp"
#include "icaclf/model.hpp"

namespace icaclf::inline ICACLF_ABI {

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::spatial: return "spatial";
    case Domain::temporal: return "temporal";
    case Domain::frequency: return "frequency";
  }
  return "unknown";
}

Domain domain_from_string(std::string_view name) {
  if (name == "spatial") return Domain::spatial;
  if (name == "temporal") return Domain::temporal;
  if (name == "frequency") return Domain::frequency;
  throw ConfigError("unknown input domain '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv(std::size_t channels, std::vector<std::size_t> kernel) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.channels = channels;
  s.kernel = std::move(kernel);
  return s;
}

LayerSpec LayerSpec::bn() {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  return s;
}

LayerSpec LayerSpec::relu_layer() { return LayerSpec{}; }

LayerSpec LayerSpec::pool(std::vector<std::size_t> window) {
  LayerSpec s;
  s.kind = LayerKind::max_pool;
  s.stride = window;
  s.window = std::move(window);
  return s;
}

LayerSpec LayerSpec::residual(std::size_t channels, std::vector<std::size_t> kernel, bool batch_norm) {
  LayerSpec s;
  s.kind = LayerKind::residual;
  s.channels = channels;
  s.kernel = std::move(kernel);
  s.batch_norm = batch_norm;
  return s;
}

std::set<Domain> ModelConfig::input_domains() const {
  std::set<Domain> domains;
  for (const auto& b : branches) domains.insert(b.domain);
  return domains;
}

void ModelConfig::validate() const {
  if (id.empty()) throw ConfigError("model config needs an id");
  if (branches.empty()) throw ConfigError(id + ": model config has no branches");
  if (input_domains().size() != branches.size()) {
    throw ConfigError(id + ": each input domain may feed only one branch");
  }
  for (const auto& b : branches) {
    const std::size_t rank = b.domain == Domain::spatial ? 3 : 1;
    if (b.input_extent.size() != rank) {
      throw ConfigError(id + ": " + std::string(to_string(b.domain)) + " branch needs " + std::to_string(rank) +
                        " input extents");
    }
    for (const auto& layer : b.layers) {
      const bool has_kernel = layer.kind == LayerKind::conv || layer.kind == LayerKind::residual;
      if (has_kernel) {
        if (layer.channels == 0) throw ConfigError(id + ": convolution with zero channels");
        if (layer.kernel.size() != rank) throw ConfigError(id + ": kernel rank does not match the branch input");
        if (!layer.stride.empty() && layer.stride.size() != rank) throw ConfigError(id + ": stride rank mismatch");
      }
      if (layer.kind == LayerKind::residual) {
        for (std::size_t k : layer.kernel) {
          if (k % 2 == 0) throw ConfigError(id + ": residual blocks need odd kernels for a centred skip");
        }
        for (std::size_t s : layer.stride) {
          if (s != 1) throw ConfigError(id + ": residual blocks need stride 1");
        }
      }
      if (layer.kind == LayerKind::max_pool &&
          (layer.window.size() != rank || (!layer.stride.empty() && layer.stride.size() != rank))) {
        throw ConfigError(id + ": pooling window rank does not match the branch input");
      }
    }
    if (b.recurrent) {
      if (b.domain == Domain::spatial) throw ConfigError(id + ": recurrent paths need a 1-D input");
      if (b.recurrent->hidden == 0) throw ParameterError(id + ": LSTM hidden size must be positive");
      if (b.recurrent->frame == 0) throw ConfigError(id + ": LSTM frame must be positive");
      if (!(b.recurrent->dropout >= 0 && b.recurrent->dropout < 1)) {
        throw ParameterError(id + ": dropout rate must lie in [0, 1)");
      }
    }
    for (std::size_t u : b.dense_units) {
      if (u == 0) throw ConfigError(id + ": dense layer with zero units");
    }
  }
  for (std::size_t u : fusion_units) {
    if (u == 0) throw ConfigError(id + ": fusion layer with zero units");
  }
}

namespace {

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::relu: return "relu";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::residual: return "residual";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  static const std::map<std::string, LayerKind> kinds{{"conv", LayerKind::conv},
                                                      {"batch_norm", LayerKind::batch_norm},
                                                      {"relu", LayerKind::relu},
                                                      {"max_pool", LayerKind::max_pool},
                                                      {"residual", LayerKind::residual}};
  auto it = kinds.find(name);
  if (it == kinds.end()) throw ConfigError("unknown layer kind '" + name + "'");
  return it->second;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& config) {
  nlohmann::json j;
  j["id"] = config.id;
  j["fusion_units"] = config.fusion_units;
  j["branches"] = nlohmann::json::array();
  for (const auto& b : config.branches) {
    nlohmann::json jb;
    jb["domain"] = std::string(to_string(b.domain));
    jb["input_extent"] = b.input_extent;
    jb["layers"] = nlohmann::json::array();
    for (const auto& l : b.layers) {
      nlohmann::json jl{{"kind", kind_name(l.kind)}};
      if (l.kind == LayerKind::conv || l.kind == LayerKind::residual) {
        jl["channels"] = l.channels;
        jl["kernel"] = l.kernel;
      }
      if (l.kind == LayerKind::max_pool) jl["window"] = l.window;
      if (!l.stride.empty()) jl["stride"] = l.stride;
      if (l.kind == LayerKind::residual) jl["batch_norm"] = l.batch_norm;
      jb["layers"].push_back(jl);
    }
    if (b.recurrent) {
      jb["recurrent"] = {{"hidden", b.recurrent->hidden},
                         {"frame", b.recurrent->frame},
                         {"dropout", b.recurrent->dropout}};
    }
    jb["dense_units"] = b.dense_units;
    j["branches"].push_back(jb);
  }
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.id = j.at("id").get<std::string>();
    c.fusion_units = j.value("fusion_units", std::vector<std::size_t>{});
    for (const auto& jb : j.at("branches")) {
      BranchConfig b;
      b.domain = domain_from_string(jb.at("domain").get<std::string>());
      b.input_extent = jb.at("input_extent").get<Shape>();
      for (const auto& jl : jb.at("layers")) {
        LayerSpec l;
        l.kind = kind_from_name(jl.at("kind").get<std::string>());
        l.channels = jl.value("channels", std::size_t{0});
        l.kernel = jl.value("kernel", std::vector<std::size_t>{});
        l.window = jl.value("window", std::vector<std::size_t>{});
        l.stride = jl.value("stride", std::vector<std::size_t>{});
        l.batch_norm = jl.value("batch_norm", false);
        b.layers.push_back(std::move(l));
      }
      if (jb.contains("recurrent") && !jb["recurrent"].is_null()) {
        const auto& jr = jb["recurrent"];
        b.recurrent = RecurrentSpec{jr.at("hidden").get<std::size_t>(), jr.at("frame").get<std::size_t>(),
                                    jr.at("dropout").get<double>()};
      }
      b.dense_units = jb.value("dense_units", std::vector<std::size_t>{});
      c.branches.push_back(std::move(b));
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

const std::vector<std::string>& single_model_ids() {
  static const std::vector<std::string> ids{"sm1", "sm2", "sm3", "tm1", "tm2", "ps1", "ps2"};
  return ids;
}

const std::vector<std::string>& combined_model_ids() {
  static const std::vector<std::string> ids{"comb1", "comb2", "comb3", "comb4"};
  return ids;
}

const std::vector<std::string>& all_model_ids() {
  static const std::vector<std::string> ids = [] {
    auto all = single_model_ids();
    all.insert(all.end(), combined_model_ids().begin(), combined_model_ids().end());
    return all;
  }();
  return ids;
}

namespace {

// Spatial stacks: three conv(3^3) blocks of 8/16/32 channels, each followed
// by 2^3 max pooling.
BranchConfig spatial_branch(const InputGeometry& geometry, bool batch_norm, bool residual) {
  BranchConfig b;
  b.domain = Domain::spatial;
  b.input_extent = geometry.spatial;
  for (std::size_t channels : {8, 16, 32}) {
    if (residual) {
      b.layers.push_back(LayerSpec::residual(channels, {3, 3, 3}, batch_norm));
    } else {
      b.layers.push_back(LayerSpec::conv(channels, {3, 3, 3}));
      if (batch_norm) b.layers.push_back(LayerSpec::bn());
      b.layers.push_back(LayerSpec::relu_layer());
    }
    b.layers.push_back(LayerSpec::pool({2, 2, 2}));
  }
  b.dense_units = {128, 32};
  return b;
}

// 1-D stacks shared by the temporal and frequency models.
BranchConfig sequence_branch(Domain domain, std::size_t length, bool recurrent) {
  BranchConfig b;
  b.domain = domain;
  b.input_extent = {length};
  const std::pair<std::size_t, std::size_t> blocks[] = {{16, 5}, {32, 5}, {64, 3}};
  for (auto [channels, kernel] : blocks) {
    b.layers.push_back(LayerSpec::conv(channels, {kernel}));
    b.layers.push_back(LayerSpec::relu_layer());
    b.layers.push_back(LayerSpec::pool({2}));
  }
  if (recurrent) b.recurrent = RecurrentSpec{64, 20, 0.3};
  b.dense_units = {64};
  return b;
}

ModelConfig single(std::string id, BranchConfig branch) {
  ModelConfig c;
  c.id = std::move(id);
  c.branches.push_back(std::move(branch));
  return c;
}

}  // namespace

ModelConfig canonical_config(std::string_view id, const InputGeometry& geometry) {
  const std::size_t T = geometry.timepoints;
  const std::size_t F = geometry.spectrum_length();
  if (id == "sm1") return single("sm1", spatial_branch(geometry, false, false));
  if (id == "sm2") return single("sm2", spatial_branch(geometry, true, false));
  if (id == "sm3") return single("sm3", spatial_branch(geometry, true, true));
  if (id == "tm1") return single("tm1", sequence_branch(Domain::temporal, T, false));
  if (id == "tm2") return single("tm2", sequence_branch(Domain::temporal, T, true));
  if (id == "ps1") return single("ps1", sequence_branch(Domain::frequency, F, false));
  if (id == "ps2") return single("ps2", sequence_branch(Domain::frequency, F, true));
  auto parts = [&](std::initializer_list<std::string_view> ids) {
    std::vector<ModelConfig> configs;
    for (auto part : ids) configs.push_back(canonical_config(part, geometry));
    return configs;
  };
  if (id == "comb1") return combine_models("comb1", parts({"sm1", "tm1", "ps1"}));
  if (id == "comb2") return combine_models("comb2", parts({"tm1", "ps1"}));
  if (id == "comb3") return combine_models("comb3", parts({"sm1", "tm1"}));
  if (id == "comb4") return combine_models("comb4", parts({"tm2", "ps2"}));
  throw ConfigError("unknown model id '" + std::string(id) + "'");
}

ModelConfig combine_models(std::string id, std::span<const ModelConfig> branches,
                           std::vector<std::size_t> fusion_units) {
  if (branches.size() < 2 || branches.size() > 3) {
    throw ConfigError(id + ": combined models take 2 or 3 branches");
  }
  ModelConfig combined;
  combined.id = std::move(id);
  combined.fusion_units = std::move(fusion_units);
  std::set<Domain> seen;
  for (const auto& part : branches) {
    if (part.is_combined()) throw ConfigError(combined.id + ": branches must be single-domain models");
    const auto& branch = part.branches.front();
    if (!seen.insert(branch.domain).second) {
      throw ConfigError(combined.id + ": duplicate " + std::string(to_string(branch.domain)) + " branch");
    }
    combined.branches.push_back(branch);
  }
  combined.validate();
  return combined;
}

InputGeometry input_geometry(const ModelConfig& config) {
  InputGeometry g;
  for (const auto& b : config.branches) {
    if (b.domain == Domain::spatial) g.spatial = b.input_extent;
    if (b.domain == Domain::temporal) g.timepoints = b.input_extent[0];
    if (b.domain == Domain::frequency) {
      bool has_temporal = false;
      for (const auto& o : config.branches) has_temporal = has_temporal || o.domain == Domain::temporal;
      if (!has_temporal) g.timepoints = 2 * b.input_extent[0];
    }
  }
  return g;
}

}  // namespace icaclf
