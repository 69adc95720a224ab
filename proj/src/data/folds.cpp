#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

#include "icaclf/data.hpp"
#include "icaclf/error.hpp"
#include "icaclf/hash.hpp"

namespace icaclf::inline ICACLF_ABI {

void Dataset::check_consistency() const {
  const std::size_t v = voxels();
  for (const auto& r : records) {
    if (r.spatial_map.size() != v || r.timecourse.size() != timepoints ||
        r.power_spectrum.size() != spectrum_length()) {
      throw FormatError("record " + r.subject_id + "/" + std::to_string(r.component_id) +
                        " does not match the dataset geometry");
    }
    if (r.label > kArtifact) {
      throw FormatError("record " + r.subject_id + "/" + std::to_string(r.component_id) + " has label " +
                        std::to_string(int(r.label)));
    }
  }
}

std::vector<std::string> Dataset::subjects() const {
  std::set<std::string> unique;
  for (const auto& r : records) unique.insert(r.subject_id);
  return {unique.begin(), unique.end()};
}

namespace {

std::vector<std::size_t> records_of(const std::vector<std::string>& subjects,
                                    const std::unordered_map<std::string, std::vector<std::size_t>>& by_subject) {
  std::vector<std::size_t> out;
  for (const auto& s : subjects) {
    const auto& idx = by_subject.at(s);
    out.insert(out.end(), idx.begin(), idx.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> balance(const Dataset& dataset, const std::vector<std::size_t>& records,
                                 std::uint64_t seed) {
  std::vector<std::size_t> signal, artifact;
  for (auto i : records) (dataset.records[i].label == kArtifact ? artifact : signal).push_back(i);
  auto& majority = artifact.size() > signal.size() ? artifact : signal;
  const std::size_t keep = std::min(signal.size(), artifact.size());
  std::mt19937_64 rng(seed);
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(keep);
  std::vector<std::size_t> out = signal;
  out.insert(out.end(), artifact.begin(), artifact.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<FoldPlan> split_folds(const Dataset& dataset, const SplitConfig& config) {
  if (config.n_folds == 0 || config.n_train_subjects == 0 || config.n_val_subjects == 0) {
    throw PartitionError("fold split needs positive train, validation and fold counts");
  }
  std::vector<std::string> subjects = dataset.subjects();
  const std::size_t pool_size = config.n_train_subjects + config.n_val_subjects;
  if (subjects.size() < pool_size + 1) {
    throw PartitionError("fold split needs at least " + std::to_string(pool_size + 1) + " subjects, dataset has " +
                         std::to_string(subjects.size()));
  }
  std::unordered_map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) by_subject[dataset.records[i].subject_id].push_back(i);

  std::mt19937_64 rng(derive_seed(config.seed, 0x5b1));
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const std::vector<std::string> pool(subjects.begin(), subjects.begin() + std::ptrdiff_t(pool_size));
  std::vector<std::string> test(subjects.begin() + std::ptrdiff_t(pool_size), subjects.end());
  std::sort(test.begin(), test.end());
  const auto test_records = records_of(test, by_subject);

  std::vector<FoldPlan> folds(config.n_folds);
  for (std::size_t k = 0; k < config.n_folds; ++k) {
    FoldPlan& f = folds[k];
    f.fold_index = k;
    std::vector<bool> is_val(pool_size, false);
    for (std::size_t j = 0; j < config.n_val_subjects; ++j) is_val[(k * config.n_val_subjects + j) % pool_size] = true;
    for (std::size_t j = 0; j < pool_size; ++j) (is_val[j] ? f.val_subjects : f.train_subjects).push_back(pool[j]);
    std::sort(f.train_subjects.begin(), f.train_subjects.end());
    std::sort(f.val_subjects.begin(), f.val_subjects.end());
    f.test_subjects = test;
    f.train_records = records_of(f.train_subjects, by_subject);
    f.val_records = records_of(f.val_subjects, by_subject);
    f.test_records = test_records;
    f.balanced_train_records = balance(dataset, f.train_records, derive_seed(config.seed, 0xf01d + k));
  }
  return folds;
}

}  // namespace icaclf
