#include <algorithm>
#include <cmath>
#include <numeric>

#include "icaclf/error.hpp"
#include "icaclf/hash.hpp"
#include "icaclf/model.hpp"

namespace icaclf::inline ICACLF_ABI {

const Tensor& ModelInputs::get(Domain domain) const {
  switch (domain) {
    case Domain::spatial: return spatial;
    case Domain::temporal: return temporal;
    case Domain::frequency: return frequency;
  }
  return spatial;
}

namespace {

Tensor uniform_tensor(Shape shape, double limit, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.data()) v = static_cast<real>(dist(rng));
  return t;
}

// He-uniform for layers feeding a ReLU.
Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  return uniform_tensor(std::move(shape), std::sqrt(6.0 / double(fan_in)), rng);
}

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  dropout_rng_.seed(derive_seed(seed, 0xd5));

  auto add_state = [this](const std::string& name, Tensor& t, bool trainable) {
    if (trainable) t.set_requires_grad(true);
    state_.push_back({name, t});
    trainable_.push_back(trainable);
  };

  auto make_conv = [&](const std::string& name, ConvSpec spec) {
    ConvLayer layer;
    Shape wshape{spec.out_channels, spec.in_channels};
    wshape.insert(wshape.end(), spec.kernel.begin(), spec.kernel.end());
    layer.weight = he_uniform(wshape, spec.in_channels * spec.kernel_volume(), rng);
    layer.bias = Tensor(Shape{spec.out_channels});
    layer.spec = std::move(spec);
    add_state(name + ".weight", layer.weight, true);
    add_state(name + ".bias", layer.bias, true);
    return layer;
  };
  auto make_bn = [&](const std::string& name, std::size_t channels) {
    BatchNormLayer layer;
    layer.gamma = Tensor(Shape{channels}, real(1));
    layer.beta = Tensor(Shape{channels});
    layer.stats.running_mean = Tensor(Shape{channels});
    layer.stats.running_var = Tensor(Shape{channels}, real(1));
    add_state(name + ".gamma", layer.gamma, true);
    add_state(name + ".beta", layer.beta, true);
    add_state(name + ".running_mean", layer.stats.running_mean, false);
    add_state(name + ".running_var", layer.stats.running_var, false);
    return layer;
  };
  auto make_dense = [&](const std::string& name, std::size_t n_in, std::size_t n_out) {
    DenseLayer layer;
    layer.weight = he_uniform(Shape{n_out, n_in}, n_in, rng);
    layer.bias = Tensor(Shape{n_out});
    add_state(name + ".weight", layer.weight, true);
    add_state(name + ".bias", layer.bias, true);
    return layer;
  };

  for (std::size_t k = 0; k < config_.branches.size(); ++k) {
    const auto& bc = config_.branches[k];
    Branch branch;
    branch.prefix = "b" + std::to_string(k);
    const int rank = bc.domain == Domain::spatial ? 3 : 1;
    std::vector<std::size_t> extents = bc.input_extent;
    std::size_t channels = 1;
    std::size_t n_conv = 0, n_bn = 0, n_relu = 0, n_pool = 0, n_res = 0;

    for (const auto& spec : bc.layers) {
      switch (spec.kind) {
        case LayerKind::conv: {
          const std::string name = branch.prefix + ".conv" + std::to_string(n_conv++);
          ConvSpec cs{rank, spec.kernel, spec.stride, channels, spec.channels};
          extents = cs.output_extents(extents);
          branch.layers.emplace_back(make_conv(name, cs));
          branch.layer_names.push_back(name);
          channels = spec.channels;
          break;
        }
        case LayerKind::batch_norm: {
          const std::string name = branch.prefix + ".bn" + std::to_string(n_bn++);
          branch.layers.emplace_back(make_bn(name, channels));
          branch.layer_names.push_back(name);
          break;
        }
        case LayerKind::relu:
          branch.layers.emplace_back(ReluLayer{});
          branch.layer_names.push_back(branch.prefix + ".relu" + std::to_string(n_relu++));
          break;
        case LayerKind::max_pool: {
          PoolLayer pool{spec.window, spec.stride.empty() ? spec.window : spec.stride};
          for (std::size_t a = 0; a < extents.size(); ++a) {
            if (pool.window[a] > extents[a]) {
              throw DimensionError(config_.id + ": pooling window " + std::to_string(pool.window[a]) +
                                   " exceeds extent " + std::to_string(extents[a]) + " on spatial axis " +
                                   std::to_string(a));
            }
            extents[a] = (extents[a] - pool.window[a]) / pool.stride[a] + 1;
          }
          branch.layers.emplace_back(std::move(pool));
          branch.layer_names.push_back(branch.prefix + ".pool" + std::to_string(n_pool++));
          break;
        }
        case LayerKind::residual: {
          const std::string name = branch.prefix + ".res" + std::to_string(n_res++);
          ResidualLayer res;
          ConvSpec cs{rank, spec.kernel, {}, channels, spec.channels};
          extents = cs.output_extents(extents);
          res.conv = make_conv(name + ".conv", cs);
          if (spec.batch_norm) res.bn = make_bn(name + ".bn", spec.channels);
          if (spec.channels != channels) {
            ConvSpec proj{rank, std::vector<std::size_t>(rank, 1), {}, channels, spec.channels};
            res.projection = make_conv(name + ".proj", proj);
          }
          for (std::size_t kx : spec.kernel) res.crop.push_back((kx - 1) / 2);
          branch.layers.emplace_back(std::move(res));
          branch.layer_names.push_back(name);
          channels = spec.channels;
          break;
        }
      }
    }

    std::size_t width = channels * product(extents);
    if (bc.recurrent) {
      const auto& rs = *bc.recurrent;
      if (bc.input_extent[0] / rs.frame == 0) {
        throw DimensionError(config_.id + ": LSTM frame " + std::to_string(rs.frame) + " longer than the input");
      }
      RecurrentLayer rec;
      rec.spec = rs;
      const double limit = 1.0 / std::sqrt(double(rs.hidden));
      rec.w_ih = uniform_tensor(Shape{4 * rs.hidden, rs.frame}, limit, rng);
      rec.w_hh = uniform_tensor(Shape{4 * rs.hidden, rs.hidden}, limit, rng);
      rec.bias = uniform_tensor(Shape{4 * rs.hidden}, limit, rng);
      add_state(branch.prefix + ".lstm.w_ih", rec.w_ih, true);
      add_state(branch.prefix + ".lstm.w_hh", rec.w_hh, true);
      add_state(branch.prefix + ".lstm.bias", rec.bias, true);
      branch.recurrent = std::move(rec);
      width += rs.hidden;
    }
    for (std::size_t i = 0; i < bc.dense_units.size(); ++i) {
      branch.dense.push_back(make_dense(branch.prefix + ".dense" + std::to_string(i), width, bc.dense_units[i]));
      width = bc.dense_units[i];
    }
    branch.feature_width = width;
    branches_.push_back(std::move(branch));
  }

  std::size_t width = 0;
  for (const auto& b : branches_) width += b.feature_width;
  for (std::size_t i = 0; i < config_.fusion_units.size(); ++i) {
    fusion_.push_back(make_dense("fusion.dense" + std::to_string(i), width, config_.fusion_units[i]));
    width = config_.fusion_units[i];
  }
  // Glorot-uniform for the sigmoid output unit.
  output_.weight = uniform_tensor(Shape{1, width}, std::sqrt(6.0 / double(width + 1)), rng);
  output_.bias = Tensor(Shape{1});
  add_state("out.weight", output_.weight, true);
  add_state("out.bias", output_.bias, true);
}

Tensor Model::run_layer(Layer& layer, const Tensor& x) {
  return std::visit(
      [&](auto& l) -> Tensor {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, ConvLayer>) {
          return conv(x, l.weight, l.bias, l.spec);
        } else if constexpr (std::is_same_v<L, BatchNormLayer>) {
          return batch_norm(x, l.gamma, l.beta, l.stats, mode_);
        } else if constexpr (std::is_same_v<L, ReluLayer>) {
          return relu(x);
        } else if constexpr (std::is_same_v<L, PoolLayer>) {
          return max_pool(x, l.window, l.stride);
        } else {
          Tensor main = conv(x, l.conv.weight, l.conv.bias, l.conv.spec);
          if (l.bn) main = batch_norm(main, l.bn->gamma, l.bn->beta, l.bn->stats, mode_);
          Tensor skip = center_crop(x, l.crop);
          if (l.projection) skip = conv(skip, l.projection->weight, l.projection->bias, l.projection->spec);
          return relu(add(main, skip));
        }
      },
      layer);
}

Tensor Model::run_branch(Branch& branch, const BranchConfig& config, const Tensor& input, ShapeTrace* trace) {
  Tensor x = input;
  for (std::size_t i = 0; i < branch.layers.size(); ++i) {
    x = run_layer(branch.layers[i], x);
    if (trace) trace->emplace_back(branch.layer_names[i], x.shape());
  }
  x = flatten(x);
  if (trace) trace->emplace_back(branch.prefix + ".flatten", x.shape());
  if (branch.recurrent) {
    auto& rec = *branch.recurrent;
    Tensor sequence = frame_sequence(input, rec.spec.frame);
    Tensor hidden = lstm(sequence, rec.w_ih, rec.w_hh, rec.bias);
    if (trace) trace->emplace_back(branch.prefix + ".lstm", hidden.shape());
    hidden = dropout(hidden, rec.spec.dropout, mode_, dropout_rng_);
    const Tensor parts[] = {x, hidden};
    x = concat(parts);
    if (trace) trace->emplace_back(branch.prefix + ".concat", x.shape());
  }
  (void)config;
  for (std::size_t i = 0; i < branch.dense.size(); ++i) {
    x = relu(dense(x, branch.dense[i].weight, branch.dense[i].bias));
    if (trace) trace->emplace_back(branch.prefix + ".dense" + std::to_string(i), x.shape());
  }
  return x;
}

std::vector<Tensor> Model::branch_features(const ModelInputs& inputs, ShapeTrace* trace) {
  std::vector<Tensor> features;
  std::size_t batch = 0;
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const auto& bc = config_.branches[k];
    const Tensor& x = inputs.get(bc.domain);
    if (!x.defined()) {
      throw DomainMismatchError(config_.id + " needs " + std::string(to_string(bc.domain)) + " input");
    }
    Shape expected{x.rank() ? x.dim(0) : 0, 1};
    expected.insert(expected.end(), bc.input_extent.begin(), bc.input_extent.end());
    if (x.shape() != expected) {
      throw DimensionError(config_.id + ": " + std::string(to_string(bc.domain)) + " input has shape " +
                           to_string(x.shape()) + ", expected " + to_string(expected));
    }
    if (k > 0 && x.dim(0) != batch) throw DimensionError(config_.id + ": inputs disagree on the batch size");
    batch = x.dim(0);
    features.push_back(run_branch(branches_[k], bc, x, trace));
  }
  return features;
}

Tensor Model::head(std::span<const Tensor> features, ShapeTrace* trace) {
  return sigmoid(head_logits(features, trace));
}

Tensor Model::head_logits(std::span<const Tensor> features, ShapeTrace* trace) {
  if (features.size() != branches_.size()) throw ContractError(config_.id + ": one feature tensor per branch");
  Tensor x = features.size() == 1 ? features.front() : concat(features);
  if (trace && features.size() > 1) trace->emplace_back("fusion.concat", x.shape());
  for (std::size_t i = 0; i < fusion_.size(); ++i) {
    x = relu(dense(x, fusion_[i].weight, fusion_[i].bias));
    if (trace) trace->emplace_back("fusion.dense" + std::to_string(i), x.shape());
  }
  x = dense(x, output_.weight, output_.bias);
  if (trace) trace->emplace_back("out", x.shape());
  return x;
}

Tensor Model::forward(const ModelInputs& inputs, ShapeTrace* trace) {
  const auto features = branch_features(inputs, trace);
  return head(features, trace);
}

Tensor Model::forward_logits(const ModelInputs& inputs, ShapeTrace* trace) {
  const auto features = branch_features(inputs, trace);
  return head_logits(features, trace);
}

std::vector<Tensor> Model::trainable_parameters() const {
  std::vector<Tensor> params;
  for (std::size_t i = 0; i < state_.size(); ++i) {
    if (trainable_[i]) params.push_back(state_[i].tensor);
  }
  return params;
}

std::size_t Model::trainable_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < state_.size(); ++i) {
    if (trainable_[i]) n += state_[i].tensor.size();
  }
  return n;
}

Tensor& Model::parameter(std::string_view name) {
  for (auto& entry : state_) {
    if (entry.name == name) return entry.tensor;
  }
  throw ConfigError(config_.id + " has no parameter '" + std::string(name) + "'");
}

Archive Model::to_archive() const {
  Archive archive;
  for (const auto& entry : state_) archive.tensors.push_back({entry.name, entry.tensor.clone()});
  archive.metadata["model_config"] = to_json(config_);
  return archive;
}

void Model::load_state(const Archive& archive) {
  if (archive.tensors.size() != state_.size()) {
    throw FormatError(config_.id + ": archive holds " + std::to_string(archive.tensors.size()) +
                      " tensors, model has " + std::to_string(state_.size()));
  }
  for (auto& entry : state_) {
    const Tensor& src = archive.at(entry.name);
    if (src.shape() != entry.tensor.shape()) {
      throw FormatError(config_.id + ": archive tensor '" + entry.name + "' has shape " + to_string(src.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), entry.tensor.data().begin());
  }
}

Model Model::from_archive(const Archive& archive) {
  if (!archive.metadata.contains("model_config")) throw FormatError("archive carries no model config");
  Model model(model_config_from_json(archive.metadata["model_config"]), 0);
  model.load_state(archive);
  return model;
}

}  // namespace icaclf
