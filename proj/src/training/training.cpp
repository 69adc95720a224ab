#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "icaclf/error.hpp"
#include "icaclf/hash.hpp"
#include "icaclf/optim.hpp"
#include "icaclf/training.hpp"

namespace icaclf::inline ICACLF_ABI {

TrainConfig TrainConfig::defaults_for(const std::string& model_id, std::uint64_t seed) {
  TrainConfig c;
  c.model_id = model_id;
  c.seed = seed;
  const auto domains = canonical_config(model_id).input_domains();
  if (domains == std::set<Domain>{Domain::spatial}) {
    c.batch_size = 16;
    c.patience = 3;
  }
  return c;
}

void TrainConfig::validate() const {
  if (model_id.empty()) throw ConfigError("train config: model id is empty");
  if (!(learning_rate > 0)) throw ConfigError("train config: learning rate must be positive");
  if (batch_size < 2) throw ConfigError("train config: batch size must be at least 2");
  if (patience == 0) throw ConfigError("train config: patience must be positive");
  if (max_epochs == 0) throw ConfigError("train config: max_epochs must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"model_id", c.model_id},   {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"patience", c.patience},   {"max_epochs", c.max_epochs},       {"seed", c.seed}};
}

nlohmann::json to_json(const RunResult& r) {
  return {{"model_id", r.model_id},
          {"fold", r.fold_index},
          {"train_loss", r.train_loss},
          {"val_accuracy", r.val_accuracy},
          {"stopped_epoch", r.stopped_epoch},
          {"best_epoch", r.best_epoch},
          {"best_val_accuracy", r.best_val_accuracy},
          {"restored_val_accuracy", r.restored_val_accuracy},
          {"archive", r.archive_path.generic_string()},
          {"archive_hash", r.archive_hash}};
}

ModelConfig model_config_for(const std::string& model_id, const Dataset& dataset) {
  InputGeometry g;
  g.spatial = {dataset.grid[0], dataset.grid[1], dataset.grid[2]};
  g.timepoints = dataset.timepoints;
  return canonical_config(model_id, g);
}

ModelConfig model_config_for(const std::string& model_id, const Dataset& dataset,
                             const nlohmann::json& architectures) {
  if (!architectures.is_object()) throw ConfigError("architectures must be an object keyed by model id");
  if (!architectures.contains(model_id)) return model_config_for(model_id, dataset);
  auto j = architectures.at(model_id);
  if (!j.is_object() || !j.contains("branches") || !j["branches"].is_array()) {
    throw ConfigError("architecture for " + model_id + " needs a branches array");
  }
  j["id"] = model_id;
  for (auto& b : j["branches"]) {
    if (b.contains("input_extent")) continue;
    const auto domain = b.value("domain", std::string{});
    if (domain == "spatial") {
      b["input_extent"] = dataset.grid;
    } else if (domain == "temporal") {
      b["input_extent"] = {dataset.timepoints};
    } else if (domain == "frequency") {
      b["input_extent"] = {dataset.spectrum_length()};
    }
  }
  return model_config_from_json(j);
}

ModelInputs gather_inputs(const Dataset& dataset, std::span<const std::size_t> records,
                          const std::set<Domain>& domains) {
  const std::size_t b = records.size();
  ModelInputs in;
  auto stack = [&](Shape shape, std::size_t width, auto member) {
    std::vector<real> values(b * width);
    for (std::size_t i = 0; i < b; ++i) {
      const auto& src = dataset.records.at(records[i]).*member;
      std::copy(src.begin(), src.end(), values.begin() + std::ptrdiff_t(i * width));
    }
    return Tensor(std::move(shape), std::move(values));
  };
  if (domains.contains(Domain::spatial)) {
    in.spatial = stack({b, 1, dataset.grid[0], dataset.grid[1], dataset.grid[2]}, dataset.voxels(),
                       &ComponentRecord::spatial_map);
  }
  if (domains.contains(Domain::temporal)) {
    in.temporal = stack({b, 1, dataset.timepoints}, dataset.timepoints, &ComponentRecord::timecourse);
  }
  if (domains.contains(Domain::frequency)) {
    in.frequency = stack({b, 1, dataset.spectrum_length()}, dataset.spectrum_length(),
                         &ComponentRecord::power_spectrum);
  }
  return in;
}

Tensor gather_labels(const Dataset& dataset, std::span<const std::size_t> records) {
  std::vector<real> labels(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) labels[i] = real(dataset.records.at(records[i]).label);
  return Tensor({records.size(), 1}, std::move(labels));
}

std::vector<double> predict(Model& model, const Dataset& dataset, std::span<const std::size_t> records,
                            std::size_t batch_size) {
  const Mode previous = model.mode();
  model.set_mode(Mode::eval);
  NoGradScope no_grad;
  const auto domains = model.config().input_domains();
  std::vector<double> out;
  out.reserve(records.size());
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const auto batch = records.subspan(start, std::min(batch_size, records.size() - start));
    const Tensor p = model.forward(gather_inputs(dataset, batch, domains));
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(double(p.data()[i]));
  }
  model.set_mode(previous);
  return out;
}

double accuracy(std::span<const double> probabilities, const Dataset& dataset, std::span<const std::size_t> records) {
  if (probabilities.size() != records.size() || records.empty()) {
    throw ContractError("accuracy: need one probability per record");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool artifact = probabilities[i] > 0.5;
    correct += artifact == (dataset.records[records[i]].label == kArtifact);
  }
  return double(correct) / double(records.size());
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

namespace {

void check_untouched(const FoldPlan& fold, const std::vector<std::size_t>& visited) {
  std::vector<std::size_t> overlap;
  std::set_intersection(visited.begin(), visited.end(), fold.test_records.begin(), fold.test_records.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw ProtocolError("training touched " + std::to_string(overlap.size()) + " test records (first index " +
                        std::to_string(overlap.front()) + ")");
  }
}

}  // namespace

RunResult run_training(const Dataset& dataset, const FoldPlan& fold, const TrainConfig& config) {
  return run_training(dataset, fold, config, model_config_for(config.model_id, dataset));
}

RunResult run_training(const Dataset& dataset, const FoldPlan& fold, const TrainConfig& config,
                       const ModelConfig& model_config) {
  config.validate();
  if (fold.balanced_train_records.empty()) throw ProtocolError("balanced training set is empty");
  if (fold.val_records.empty()) throw ProtocolError("validation set is empty");

  RunResult result;
  result.model_id = config.model_id;
  result.fold_index = fold.fold_index;
  std::vector<std::size_t> visited(fold.balanced_train_records);
  visited.insert(visited.end(), fold.val_records.begin(), fold.val_records.end());
  std::sort(visited.begin(), visited.end());
  visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
  check_untouched(fold, visited);
  result.visited_records = std::move(visited);

  Model model(model_config, derive_seed(config.seed, 0x1a17));
  model.reseed_dropout(derive_seed(config.seed, 0xd5));
  Adam adam(model.trainable_parameters(), AdamConfig{config.learning_rate});
  EarlyStopping stopper(config.patience);
  const auto domains = model_config.input_domains();

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<std::size_t> order(fold.balanced_train_records);
    std::mt19937_64 rng(derive_seed(config.seed, 0xe90c + epoch));
    std::shuffle(order.begin(), order.end(), rng);

    model.set_mode(Mode::train);
    double loss_sum = 0;
    for (const auto& batch : make_batches(std::move(order), config.batch_size)) {
      Tape tape;
      Tensor loss;
      {
        TapeScope scope(tape);
        const Tensor z = model.forward_logits(gather_inputs(dataset, batch, domains));
        loss = bce_with_logits(z, gather_labels(dataset, batch));
      }
      tape.backward(loss);
      adam.step();
      adam.zero_grad();
      loss_sum += double(loss.item()) * double(batch.size());
    }
    result.train_loss.push_back(loss_sum / double(fold.balanced_train_records.size()));

    const auto probs = predict(model, dataset, fold.val_records);
    const double val_acc = accuracy(probs, dataset, fold.val_records);
    result.val_accuracy.push_back(val_acc);
    const auto decision = stopper.step(val_acc, [&] { return serialize_archive(model.to_archive()); });
    if (decision == StopDecision::stop) break;
  }

  result.stopped_epoch = stopper.epochs_seen();
  result.best_epoch = stopper.best_epoch();
  result.best_val_accuracy = stopper.best_metric();
  result.archive_bytes = stopper.best_snapshot();
  result.archive_hash = fnv1a(result.archive_bytes);
  model.load_state(parse_archive(result.archive_bytes));
  result.restored_val_accuracy = accuracy(predict(model, dataset, fold.val_records), dataset, fold.val_records);
  return result;
}

std::uint64_t run_seed(std::uint64_t master, const std::string& model_id, std::size_t fold) {
  return derive_seed(derive_seed(master, fnv1a(model_id)), fold);
}

namespace {

template <typename E>
[[noreturn]] void rethrow_annotated(const E& e, const std::string& where) {
  throw E(where + ": " + e.what());
}

}  // namespace

std::vector<RunResult> run_cv(const Dataset& dataset, std::span<const std::string> model_ids, const CvConfig& config) {
  dataset.check_consistency();
  std::vector<ModelConfig> architectures;
  for (const auto& id : model_ids) architectures.push_back(model_config_for(id, dataset, config.architectures));
  auto folds = split_folds(dataset, config.split);

  struct Job {
    std::string model_id;
    std::size_t fold;
  };
  std::vector<Job> jobs;
  for (const auto& id : model_ids)
    for (std::size_t k = 0; k < folds.size(); ++k) jobs.push_back({id, k});
  std::vector<RunResult> results(jobs.size());

  const std::size_t workers = std::max<std::size_t>(1, std::min(config.jobs, jobs.size()));
  const int cores = std::max(1, omp_get_num_procs());
  const int threads_per_worker = std::max(1, cores / int(workers));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    omp_set_num_threads(threads_per_worker);
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const auto& job = jobs[j];
      const std::string where = "model " + job.model_id + ", fold " + std::to_string(job.fold);
      try {
        try {
          auto train = TrainConfig::defaults_for(job.model_id, run_seed(config.seed, job.model_id, job.fold));
          if (config.max_epochs) train.max_epochs = *config.max_epochs;
          const auto m = std::size_t(std::find(model_ids.begin(), model_ids.end(), job.model_id) - model_ids.begin());
          results[j] = run_training(dataset, folds[job.fold], train, architectures[m]);
          if (config.out_dir) {
            const auto rel = std::filesystem::path(job.model_id) / ("fold_" + std::to_string(job.fold) + ".icap");
            write_file(*config.out_dir / rel, results[j].archive_bytes);
            results[j].archive_path = rel;
          }
          if (config.on_result) {
            std::lock_guard lock(failure_mutex);
            config.on_result(results[j]);
          }
        } catch (const ProtocolError& e) {
          rethrow_annotated(e, where);
        } catch (const DegenerateBatchError& e) {
          rethrow_annotated(e, where);
        } catch (const IoError& e) {
          rethrow_annotated(e, where);
        } catch (const ConfigError& e) {
          rethrow_annotated(e, where);
        } catch (const Error& e) {
          rethrow_annotated(e, where);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  if (config.out_dir) {
    write_file(*config.out_dir / "manifest.json", cv_manifest(results, config).dump(2) + "\n");
  }
  return results;
}

nlohmann::json cv_manifest(std::span<const RunResult> results, const CvConfig& config) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : results) runs.push_back(to_json(r));
  return {{"seed", config.seed},
          {"split",
           {{"n_train_subjects", config.split.n_train_subjects},
            {"n_val_subjects", config.split.n_val_subjects},
            {"n_folds", config.split.n_folds},
            {"seed", config.split.seed}}},
          {"runs", runs}};
}

}  // namespace icaclf
