#include "gradient_suite.hpp"

#include <functional>
#include <map>
#include <random>
#include <stdexcept>

#include "icaclf/gradcheck.hpp"
#include "icaclf/model.hpp"
#include "icaclf/ops.hpp"

#ifndef ICACLF_REAL_F64
#error "the gradient suite must be compiled against the 64-bit build"
#endif

namespace gradsuite {

using namespace icaclf;

namespace {

constexpr double kStep = 1e-3;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

// Reduces any tensor to a scalar through a fixed random projection, so that
// every output element gets a distinct upstream gradient.
struct Projection {
  Tensor weight;
  Tensor bias;

  Tensor operator()(const Tensor& x) const {
    const Tensor flat = x.rank() == 2 ? x : flatten(x);
    return sum(dense(flat, weight, bias));
  }
};

Projection projection_for(const Shape& output, std::mt19937_64& rng) {
  std::size_t width = 1;
  for (std::size_t i = 1; i < output.size(); ++i) width *= output[i];
  return {random_tensor({1, width}, rng), random_tensor({1}, rng)};
}

CaseResult check(const std::string& name, const std::function<Tensor()>& fn, std::vector<Tensor> params,
                 std::size_t max_entries = 0) {
  GradCheckOptions options;
  options.step = kStep;
  options.max_entries_per_tensor = max_entries;
  options.seed = 17;
  const auto r = finite_diff_check(fn, params, options);
  return {name, r.max_relative_error, r.checked, r.skipped};
}

// Output of `op` on `params`, reduced through a projection sized on the
// first evaluation.
CaseResult check_op(const std::string& name, std::vector<Tensor> params,
                    const std::function<Tensor(const std::vector<Tensor>&)>& op, std::mt19937_64& rng) {
  Tensor probe;
  {
    NoGradScope no_grad;
    probe = op(params);
  }
  const Projection project = projection_for(probe.shape(), rng);
  return check(name, [&] { return project(op(params)); }, params);
}

using CaseFn = std::function<CaseResult(const std::string&)>;

const std::map<std::string, CaseFn>& layer_cases() {
  static const std::map<std::string, CaseFn> cases = {
      {"conv1d",
       [](const std::string& n) {
         std::mt19937_64 rng(1);
         ConvSpec spec{1, {3}, {}, 2, 3};
         return check_op(n, {random_tensor({2, 2, 9}, rng), random_tensor({3, 2, 3}, rng), random_tensor({3}, rng)},
                         [spec](const auto& p) { return conv(p[0], p[1], p[2], spec); }, rng);
       }},
      {"conv1d_strided",
       [](const std::string& n) {
         std::mt19937_64 rng(2);
         ConvSpec spec{1, {4}, {2}, 2, 2};
         return check_op(n, {random_tensor({2, 2, 11}, rng), random_tensor({2, 2, 4}, rng), random_tensor({2}, rng)},
                         [spec](const auto& p) { return conv(p[0], p[1], p[2], spec); }, rng);
       }},
      {"conv3d",
       [](const std::string& n) {
         std::mt19937_64 rng(3);
         ConvSpec spec{3, {3, 2, 3}, {}, 2, 3};
         return check_op(n,
                         {random_tensor({2, 2, 5, 4, 5}, rng), random_tensor({3, 2, 3, 2, 3}, rng),
                          random_tensor({3}, rng)},
                         [spec](const auto& p) { return conv(p[0], p[1], p[2], spec); }, rng);
       }},
      {"conv3d_strided",
       [](const std::string& n) {
         std::mt19937_64 rng(4);
         ConvSpec spec{3, {2, 2, 2}, {2, 1, 2}, 1, 2};
         return check_op(n,
                         {random_tensor({2, 1, 6, 5, 6}, rng), random_tensor({2, 1, 2, 2, 2}, rng),
                          random_tensor({2}, rng)},
                         [spec](const auto& p) { return conv(p[0], p[1], p[2], spec); }, rng);
       }},
      {"max_pool1d",
       [](const std::string& n) {
         std::mt19937_64 rng(5);
         return check_op(n, {random_tensor({2, 3, 12}, rng)},
                         [](const auto& p) {
                           const std::size_t w[] = {2};
                           return max_pool(p[0], w, w);
                         },
                         rng);
       }},
      {"max_pool3d",
       [](const std::string& n) {
         std::mt19937_64 rng(6);
         return check_op(n, {random_tensor({2, 2, 5, 6, 4}, rng)},
                         [](const auto& p) {
                           const std::size_t w[] = {2, 2, 2};
                           return max_pool(p[0], w, w);
                         },
                         rng);
       }},
      {"dense",
       [](const std::string& n) {
         std::mt19937_64 rng(7);
         return check_op(n, {random_tensor({4, 6}, rng), random_tensor({5, 6}, rng), random_tensor({5}, rng)},
                         [](const auto& p) { return dense(p[0], p[1], p[2]); }, rng);
       }},
      {"batch_norm_train",
       [](const std::string& n) {
         std::mt19937_64 rng(8);
         BatchNormState state{Tensor({3}), Tensor({3}, real(1))};
         return check_op(n, {random_tensor({4, 3, 2, 3, 2}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
                         [state](const auto& p) mutable { return batch_norm(p[0], p[1], p[2], state, Mode::train); },
                         rng);
       }},
      {"batch_norm_eval",
       [](const std::string& n) {
         std::mt19937_64 rng(9);
         BatchNormState state{random_tensor({2}, rng), Tensor({2}, real(1.5))};
         return check_op(n, {random_tensor({3, 2, 5}, rng), random_tensor({2}, rng), random_tensor({2}, rng)},
                         [state](const auto& p) mutable { return batch_norm(p[0], p[1], p[2], state, Mode::eval); },
                         rng);
       }},
      {"dropout_train",
       [](const std::string& n) {
         std::mt19937_64 rng(10);
         return check_op(n, {random_tensor({4, 10}, rng)},
                         [](const auto& p) {
                           std::mt19937_64 mask_rng(99);  // same mask on every evaluation
                           return dropout(p[0], 0.3, Mode::train, mask_rng);
                         },
                         rng);
       }},
      {"lstm",
       [](const std::string& n) {
         std::mt19937_64 rng(11);
         const std::size_t H = 4, F = 3;
         return check_op(n,
                         {random_tensor({2, 5, F}, rng), random_tensor({4 * H, F}, rng, 0.5),
                          random_tensor({4 * H, H}, rng, 0.5), random_tensor({4 * H}, rng, 0.5)},
                         [](const auto& p) { return lstm(p[0], p[1], p[2], p[3]); }, rng);
       }},
      {"relu",
       [](const std::string& n) {
         std::mt19937_64 rng(12);
         return check_op(n, {random_tensor({3, 7}, rng)}, [](const auto& p) { return relu(p[0]); }, rng);
       }},
      {"sigmoid",
       [](const std::string& n) {
         std::mt19937_64 rng(13);
         return check_op(n, {random_tensor({3, 7}, rng, 2.0)}, [](const auto& p) { return sigmoid(p[0]); }, rng);
       }},
      {"tanh",
       [](const std::string& n) {
         std::mt19937_64 rng(14);
         return check_op(n, {random_tensor({3, 7}, rng)}, [](const auto& p) { return icaclf::tanh(p[0]); }, rng);
       }},
      {"add_scale",
       [](const std::string& n) {
         std::mt19937_64 rng(15);
         return check_op(n, {random_tensor({2, 3, 4}, rng), random_tensor({2, 3, 4}, rng)},
                         [](const auto& p) { return scale(add(p[0], p[1]), real(-1.7)); }, rng);
       }},
      {"concat_split",
       [](const std::string& n) {
         std::mt19937_64 rng(16);
         return check_op(n, {random_tensor({2, 3}, rng), random_tensor({2, 5}, rng)},
                         [](const auto& p) {
                           const Tensor joined = concat(std::span<const Tensor>(p.data(), 2));
                           const std::size_t widths[] = {4, 4};
                           auto parts = split(joined, widths);
                           return add(icaclf::tanh(parts[0]), parts[1]);
                         },
                         rng);
       }},
      {"center_crop",
       [](const std::string& n) {
         std::mt19937_64 rng(17);
         return check_op(n, {random_tensor({2, 2, 5, 6, 5}, rng)},
                         [](const auto& p) {
                           const std::size_t crop[] = {1, 2, 1};
                           return center_crop(p[0], crop);
                         },
                         rng);
       }},
      {"frame_sequence",
       [](const std::string& n) {
         std::mt19937_64 rng(18);
         return check_op(n, {random_tensor({2, 1, 23}, rng)}, [](const auto& p) { return frame_sequence(p[0], 5); },
                         rng);
       }},
      {"bce_loss",
       [](const std::string& n) {
         std::mt19937_64 rng(19);
         Tensor logits = random_tensor({6, 1}, rng);
         const Tensor labels({6, 1}, std::vector<real>{1, 0, 0, 1, 1, 0});
         return check(n, [&] { return bce_loss(sigmoid(logits), labels); }, {logits});
       }},
      {"bce_with_logits",
       [](const std::string& n) {
         std::mt19937_64 rng(20);
         Tensor logits = random_tensor({6, 1}, rng, 3.0);
         const Tensor labels({6, 1}, std::vector<real>{1, 0, 0, 1, 1, 0});
         return check(n, [&] { return bce_with_logits(logits, labels); }, {logits});
       }},
  };
  return cases;
}

ModelConfig shrunk_config(const std::string& id) {
  // The canonical spatial stack needs 22^3, so build it there and shrink.
  InputGeometry geometry;
  geometry.spatial = {22, 22, 22};
  geometry.timepoints = kTimepoints;
  ModelConfig config = canonical_config(id, geometry);
  // Three 2^3 poolings do not fit in 12^3: keep the first, make the others
  // identity windows. LSTM frames shrink with the sequence.
  for (auto& branch : config.branches) {
    if (branch.domain == Domain::spatial) {
      branch.input_extent = {kSpatialExtent, kSpatialExtent, kSpatialExtent};
      bool first = true;
      for (auto& layer : branch.layers) {
        if (layer.kind != LayerKind::max_pool) continue;
        if (!first) layer.window = layer.stride = {1, 1, 1};
        first = false;
      }
    }
    if (branch.recurrent) branch.recurrent->frame = 8;
  }
  config.validate();
  return config;
}

}  // namespace

std::vector<std::string> layer_case_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : layer_cases()) names.push_back(name);
  return names;
}

CaseResult run_layer_case(const std::string& name) {
  const auto it = layer_cases().find(name);
  if (it == layer_cases().end()) throw std::invalid_argument("unknown gradient case " + name);
  return it->second(name);
}

std::vector<std::string> model_case_names() { return all_model_ids(); }

CaseResult run_model_case(const std::string& model_id) {
  Model model(shrunk_config(model_id), 23);
  std::mt19937_64 rng(29);
  const std::size_t batch = 3;
  ModelInputs inputs;
  inputs.spatial = random_tensor({batch, 1, kSpatialExtent, kSpatialExtent, kSpatialExtent}, rng);
  inputs.temporal = random_tensor({batch, 1, kTimepoints}, rng);
  inputs.frequency = random_tensor({batch, 1, kTimepoints / 2}, rng);
  const Tensor labels({batch, 1}, std::vector<real>{1, 0, 1});
  // Train mode exercises batch statistics and dropout; the dropout stream is
  // reseeded so every evaluation draws the same mask.
  model.set_mode(Mode::train);
  auto loss = [&] {
    model.reseed_dropout(31);
    return bce_with_logits(model.forward_logits(inputs), labels);
  };
  return check(model_id, loss, model.trainable_parameters(), 6);
}

}  // namespace gradsuite
