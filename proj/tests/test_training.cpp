#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "icaclf/error.hpp"
#include "icaclf/training.hpp"

using namespace icaclf;

namespace {

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    SynthConfig c;
    c.n_subjects = 24;
    c.components_per_subject = 6;
    c.grid = {6, 6, 6};
    c.timepoints = 128;
    c.seed = 11;
    return generate_synthetic(c);
  }();
  return ds;
}

SplitConfig small_split() {
  SplitConfig s;
  s.n_train_subjects = 12;
  s.n_val_subjects = 4;
  s.n_folds = 2;
  s.seed = 3;
  return s;
}

TrainConfig quick(const std::string& id, std::size_t epochs, std::uint64_t seed = 1) {
  auto c = TrainConfig::defaults_for(id, seed);
  c.batch_size = 16;
  c.max_epochs = epochs;
  return c;
}

}  // namespace

TEST(Batches, CountAndCoverage) {
  std::vector<std::size_t> order(160);
  std::iota(order.begin(), order.end(), 0);
  const auto batches = make_batches(order, 16);
  EXPECT_EQ(batches.size(), 10u);
  std::vector<std::size_t> seen;
  for (const auto& b : batches) seen.insert(seen.end(), b.begin(), b.end());
  EXPECT_EQ(seen, order);
}

TEST(Batches, TrailingSingletonIsMerged) {
  std::vector<std::size_t> order(33);
  std::iota(order.begin(), order.end(), 0);
  const auto batches = make_batches(order, 16);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[1].size(), 17u);
  EXPECT_EQ(make_batches(std::vector<std::size_t>(34), 16).size(), 3u);
}

TEST(TrainConfig, DefaultsPerInputDomain) {
  for (const auto& id : {"sm1", "sm2", "sm3"}) {
    const auto c = TrainConfig::defaults_for(id);
    EXPECT_EQ(c.batch_size, 16u) << id;
    EXPECT_EQ(c.patience, 3u) << id;
  }
  for (const auto& id : {"tm1", "tm2", "ps1", "ps2", "comb1", "comb4"}) {
    const auto c = TrainConfig::defaults_for(id);
    EXPECT_EQ(c.batch_size, 128u) << id;
    EXPECT_EQ(c.patience, 4u) << id;
  }
  const auto c = TrainConfig::defaults_for("tm1");
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.max_epochs, 50u);
  auto bad = c;
  bad.batch_size = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Training, LossDecreasesAndBestSnapshotIsRestored) {
  const auto& ds = small_dataset();
  const auto folds = split_folds(ds, small_split());
  for (const auto& id : {"ps1", "tm1"}) {
    const auto r = run_training(ds, folds[0], quick(id, 6));
    ASSERT_FALSE(r.train_loss.empty()) << id;
    EXPECT_LT(r.train_loss.back(), r.train_loss.front()) << id;
    EXPECT_EQ(r.val_accuracy.size(), r.stopped_epoch);
    EXPECT_DOUBLE_EQ(r.best_val_accuracy, *std::max_element(r.val_accuracy.begin(), r.val_accuracy.end()));
    EXPECT_DOUBLE_EQ(r.restored_val_accuracy, r.best_val_accuracy) << id;
    EXPECT_DOUBLE_EQ(r.val_accuracy[r.best_epoch - 1], r.best_val_accuracy);
  }
}

TEST(Training, PatienceStopsAfterNonImprovingEpochs) {
  const auto& ds = small_dataset();
  const auto folds = split_folds(ds, small_split());
  auto c = quick("ps1", 40);
  c.patience = 1;
  const auto r = run_training(ds, folds[1], c);
  if (r.stopped_epoch < c.max_epochs) {
    EXPECT_EQ(r.stopped_epoch, r.best_epoch + c.patience);
    for (std::size_t e = r.best_epoch; e < r.stopped_epoch; ++e)
      EXPECT_LE(r.val_accuracy[e], r.best_val_accuracy);
  }
}

TEST(Training, NeverTouchesTestRecords) {
  const auto& ds = small_dataset();
  const auto folds = split_folds(ds, small_split());
  const auto r = run_training(ds, folds[0], quick("ps1", 1));
  std::vector<std::size_t> overlap;
  std::set_intersection(r.visited_records.begin(), r.visited_records.end(), folds[0].test_records.begin(),
                        folds[0].test_records.end(), std::back_inserter(overlap));
  EXPECT_TRUE(overlap.empty());

  auto leaky = folds[0];
  leaky.balanced_train_records.push_back(leaky.test_records.front());
  std::sort(leaky.balanced_train_records.begin(), leaky.balanced_train_records.end());
  EXPECT_THROW(run_training(ds, leaky, quick("ps1", 1)), ProtocolError);

  auto empty = folds[0];
  empty.balanced_train_records.clear();
  EXPECT_THROW(run_training(ds, empty, quick("ps1", 1)), ProtocolError);
}

TEST(Training, DeterministicForFixedSeed) {
  const auto& ds = small_dataset();
  const auto folds = split_folds(ds, small_split());
  const auto a = run_training(ds, folds[0], quick("tm1", 2, 9));
  const auto b = run_training(ds, folds[0], quick("tm1", 2, 9));
  EXPECT_EQ(a.archive_hash, b.archive_hash);
  EXPECT_EQ(a.train_loss, b.train_loss);
  const auto c = run_training(ds, folds[0], quick("tm1", 2, 10));
  EXPECT_NE(a.archive_hash, c.archive_hash);
}

TEST(RunSeed, DistinctPerModelAndFold) {
  std::set<std::uint64_t> seeds;
  for (const auto& id : all_model_ids())
    for (std::size_t k = 0; k < 5; ++k) seeds.insert(run_seed(7, id, k));
  EXPECT_EQ(seeds.size(), all_model_ids().size() * 5);
  EXPECT_EQ(run_seed(7, "sm1", 2), run_seed(7, "sm1", 2));
}

TEST(CrossValidation, WritesArchivesAndManifest) {
  const auto& ds = small_dataset();
  const auto dir = std::filesystem::temp_directory_path() / "icaclf_cv_test";
  std::filesystem::remove_all(dir);
  CvConfig cfg;
  cfg.split = small_split();
  cfg.seed = 5;
  cfg.max_epochs = 1;
  cfg.out_dir = dir;
  cfg.jobs = 2;
  std::size_t callbacks = 0;
  cfg.on_result = [&](const RunResult&) { ++callbacks; };
  const std::vector<std::string> ids{"ps1", "tm1"};
  const auto results = run_cv(ds, ids, cfg);
  ASSERT_EQ(results.size(), 4u);
  EXPECT_EQ(callbacks, 4u);
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(results[i].model_id, ids[i / 2]);
    EXPECT_EQ(results[i].fold_index, i % 2);
    EXPECT_TRUE(std::filesystem::exists(dir / results[i].archive_path));
  }
  std::ifstream in(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(in);
  EXPECT_EQ(manifest["runs"].size(), 4u);
  EXPECT_EQ(manifest["seed"], 5);

  // The same master seed reproduces every archive regardless of job count.
  cfg.out_dir.reset();
  cfg.jobs = 1;
  cfg.on_result = nullptr;
  const auto again = run_cv(ds, ids, cfg);
  for (std::size_t i = 0; i < results.size(); ++i) EXPECT_EQ(again[i].archive_hash, results[i].archive_hash);
  std::filesystem::remove_all(dir);
}

TEST(CrossValidation, ErrorsNameModelAndFold) {
  const auto& ds = small_dataset();
  CvConfig cfg;
  cfg.split = small_split();
  cfg.max_epochs = 1;
  const std::vector<std::string> ids{"nope"};
  EXPECT_THROW(run_cv(ds, ids, cfg), ConfigError);
}
