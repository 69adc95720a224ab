#pragma once

#include "icaclf/config.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "icaclf/archive.hpp"
#include "icaclf/ops.hpp"
#include "icaclf/tensor.hpp"

namespace icaclf::inline ICACLF_ABI {

enum class Domain { spatial, temporal, frequency };

std::string_view to_string(Domain domain);
Domain domain_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Declarative configuration

enum class LayerKind { conv, batch_norm, relu, max_pool, residual };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t channels = 0;           // conv, residual
  std::vector<std::size_t> kernel;    // conv, residual
  std::vector<std::size_t> window;    // max_pool
  std::vector<std::size_t> stride;    // conv, max_pool; empty means 1 / window
  bool batch_norm = false;            // residual: normalize the conv output

  static LayerSpec conv(std::size_t channels, std::vector<std::size_t> kernel);
  static LayerSpec bn();
  static LayerSpec relu_layer();
  static LayerSpec pool(std::vector<std::size_t> window);
  static LayerSpec residual(std::size_t channels, std::vector<std::size_t> kernel, bool batch_norm);
};

/// LSTM path running beside the convolution stack. The 1-D input is cut
/// into non-overlapping frames of `frame` samples, one frame per time step.
struct RecurrentSpec {
  std::size_t hidden = 64;
  std::size_t frame = 20;
  double dropout = 0.3;
};

struct BranchConfig {
  Domain domain = Domain::spatial;
  Shape input_extent;  // spatial {D, H, W}; temporal / frequency {L}
  std::vector<LayerSpec> layers;
  std::optional<RecurrentSpec> recurrent;
  std::vector<std::size_t> dense_units;  // ReLU layers after flatten / merge
};

struct ModelConfig {
  std::string id;
  std::vector<BranchConfig> branches;
  // Dense ReLU layers between the branch concatenation and the output unit.
  std::vector<std::size_t> fusion_units;

  std::set<Domain> input_domains() const;
  bool is_combined() const { return branches.size() > 1; }
  // Structural checks; throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Input extents the canonical configs are built for.
struct InputGeometry {
  Shape spatial{45, 54, 45};
  std::size_t timepoints = 1200;

  std::size_t spectrum_length() const { return timepoints / 2; }
};

const std::vector<std::string>& single_model_ids();
const std::vector<std::string>& combined_model_ids();
const std::vector<std::string>& all_model_ids();

/// Canonical architecture for an id in all_model_ids(); throws ConfigError
/// for anything else.
ModelConfig canonical_config(std::string_view id, const InputGeometry& geometry = {});

/// Fuses the feature extractors of 2 or 3 single-domain configs (everything
/// before their output unit) through concat -> dense(fusion_units) -> unit.
ModelConfig combine_models(std::string id, std::span<const ModelConfig> branches,
                           std::vector<std::size_t> fusion_units = {128, 32});

/// Input extents implied by a config's branches.
InputGeometry input_geometry(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Instantiated model

struct ModelInputs {
  Tensor spatial;    // [batch, 1, D, H, W]
  Tensor temporal;   // [batch, 1, T]
  Tensor frequency;  // [batch, 1, T / 2]

  const Tensor& get(Domain domain) const;
};

// (layer path, output shape) pairs in execution order.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  // Copies would alias parameter storage; go through archives instead.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  /// Probabilities [batch, 1]; 1 means artifact.
  Tensor forward(const ModelInputs& inputs, ShapeTrace* trace = nullptr);
  /// Pre-sigmoid scores [batch, 1], for numerically stable training losses.
  Tensor forward_logits(const ModelInputs& inputs, ShapeTrace* trace = nullptr);

  /// Per-branch feature vectors feeding the concatenation.
  std::vector<Tensor> branch_features(const ModelInputs& inputs, ShapeTrace* trace = nullptr);
  /// Fusion layers and output unit applied to already computed features.
  Tensor head(std::span<const Tensor> features, ShapeTrace* trace = nullptr);
  Tensor head_logits(std::span<const Tensor> features, ShapeTrace* trace = nullptr);

  /// Every tensor (trainable and running statistics) in layer order.
  const std::vector<NamedTensor>& state() const { return state_; }
  std::vector<Tensor> trainable_parameters() const;
  std::size_t trainable_count() const;
  Tensor& parameter(std::string_view name);

  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  /// Archive with the config embedded in the manifest metadata.
  Archive to_archive() const;
  /// Copies values from an archive whose tensor names and shapes match.
  void load_state(const Archive& archive);
  static Model from_archive(const Archive& archive);

 private:
  struct ConvLayer {
    ConvSpec spec;
    Tensor weight;
    Tensor bias;
  };
  struct BatchNormLayer {
    Tensor gamma;
    Tensor beta;
    BatchNormState stats;
  };
  struct ReluLayer {};
  struct PoolLayer {
    std::vector<std::size_t> window;
    std::vector<std::size_t> stride;
  };
  struct ResidualLayer {
    ConvLayer conv;
    std::optional<BatchNormLayer> bn;
    std::optional<ConvLayer> projection;
    std::vector<std::size_t> crop;
  };
  using Layer = std::variant<ConvLayer, BatchNormLayer, ReluLayer, PoolLayer, ResidualLayer>;
  struct DenseLayer {
    Tensor weight;
    Tensor bias;
  };
  struct RecurrentLayer {
    RecurrentSpec spec;
    Tensor w_ih;
    Tensor w_hh;
    Tensor bias;
  };
  struct Branch {
    std::string prefix;
    std::vector<std::string> layer_names;
    std::vector<Layer> layers;
    std::optional<RecurrentLayer> recurrent;
    std::vector<DenseLayer> dense;
    std::size_t feature_width = 0;
  };

  Tensor run_branch(Branch& branch, const BranchConfig& config, const Tensor& input, ShapeTrace* trace);
  Tensor run_layer(Layer& layer, const Tensor& x);

  ModelConfig config_;
  Mode mode_ = Mode::train;
  std::vector<Branch> branches_;
  std::vector<DenseLayer> fusion_;
  DenseLayer output_;
  std::vector<NamedTensor> state_;
  std::vector<bool> trainable_;
  std::mt19937_64 dropout_rng_;
};

}  // namespace icaclf
