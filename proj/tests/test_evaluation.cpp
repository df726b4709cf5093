#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mgnet/error.hpp"
#include "mgnet/evaluation.hpp"
#include "mgnet/reference.hpp"
#include "mgnet/rng.hpp"
#include "test_util.hpp"

using namespace mgnet;
using namespace testutil;

TEST_SUITE_BEGIN("evaluation");

namespace {

Matrix probs_from_scores(const std::vector<double> &scores) {
  Matrix p(scores.size(), 2);
  for (std::size_t s = 0; s < scores.size(); ++s) {
    p(s, 0) = 1.0 - scores[s];
    p(s, 1) = scores[s];
  }
  return p;
}

Cohort small_cohort(std::size_t per_class, double signal, std::uint64_t seed,
                    std::size_t nodes = 12) {
  SyntheticSpec spec;
  spec.n_nodes = nodes;
  spec.subjects_per_class = per_class;
  spec.signal_strength = {signal, signal};
  spec.noise_level = 0.1;
  spec.seed = seed;
  return generate_synthetic(spec);
}

PipelineConfig quick_config() {
  PipelineConfig cfg;
  cfg.k_neighbors = 3;
  cfg.train.epochs = 6;
  cfg.train.batch_size = 6;
  cfg.train.layers = 1;
  cfg.train.d_out = 6;
  return cfg;
}

}  // namespace

TEST_CASE("accuracy: all correct and all wrong") {
  CHECK(accuracy(probs_from_scores({0.1, 0.9}), {0, 1}) == 100.0);
  CHECK(accuracy(probs_from_scores({0.9, 0.1}), {0, 1}) == 0.0);
}

TEST_CASE("accuracy ties at 0.5 resolve to class 0") {
  CHECK(accuracy(probs_from_scores({0.5}), {0}) == 100.0);
  CHECK(accuracy(probs_from_scores({0.5}), {1}) == 0.0);
}

TEST_CASE("accuracy matches a plain loop on a random case") {
  Rng rng(110);
  std::vector<double> scores(25);
  std::vector<int> labels(25);
  for (std::size_t s = 0; s < 25; ++s) {
    scores[s] = rng.uniform();
    labels[s] = rng.below(2) ? 1 : 0;
  }
  std::size_t correct = 0;
  for (std::size_t s = 0; s < 25; ++s)
    if ((scores[s] > 0.5 ? 1 : 0) == labels[s]) ++correct;
  CHECK(accuracy(probs_from_scores(scores), labels) == 100.0 * correct / 25.0);
}

TEST_CASE("auc: perfectly separated scores give 100") {
  CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 100.0);
}

TEST_CASE("auc: identical scores give 50") {
  CHECK(auc({0.4, 0.4, 0.4, 0.4}, {0, 1, 0, 1}) == 50.0);
}

TEST_CASE("auc equals brute-force pair enumeration exactly") {
  Rng rng(111);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + rng.below(196);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool both = false;
    for (std::size_t s = 0; s < n; ++s) {
      // coarse grid so ties actually occur
      scores[s] = static_cast<double>(rng.below(9)) / 8.0;
      labels[s] = rng.below(2) ? 1 : 0;
    }
    labels[0] = 0;
    labels[1] = 1;
    both = true;
    REQUIRE(both);
    CHECK(auc(scores, labels) == ref::auc_pairwise(scores, labels));
  }
}

TEST_CASE("auc rejects single-class labels") {
  CHECK_THROWS_AS(auc({0.1, 0.9}, {1, 1}), DataError);
}

TEST_CASE("fold plan partitions subjects with stratified balance") {
  Rng rng(112);
  std::vector<int> labels(37);
  for (auto &y : labels) y = rng.below(2) ? 1 : 0;
  // top up so both classes have >= 5
  for (std::size_t i = 0; i < 5; ++i) labels[i] = 0;
  for (std::size_t i = 5; i < 10; ++i) labels[i] = 1;

  const std::size_t folds = 5;
  const FoldPlan plan = make_fold_plan(labels, folds, 99);

  std::vector<std::size_t> seen(labels.size(), 0);
  for (std::size_t f = 0; f < folds; ++f) {
    const auto test = plan.test_indices(f);
    const auto val = plan.val_indices(f);
    const auto train = plan.train_indices(f);
    CHECK(test.size() + val.size() + train.size() == labels.size());
    std::set<std::size_t> all(test.begin(), test.end());
    all.insert(val.begin(), val.end());
    all.insert(train.begin(), train.end());
    CHECK(all.size() == labels.size());  // disjoint and complete
    for (std::size_t s : test) seen[s] += 1;
  }
  for (std::size_t c : seen) CHECK(c == 1);  // each subject tested exactly once

  // per-fold class counts within 1 of the ideal
  for (int cls : {0, 1}) {
    std::size_t total = 0;
    for (int y : labels)
      if (y == cls) ++total;
    std::vector<std::size_t> count(folds, 0);
    for (std::size_t s = 0; s < labels.size(); ++s)
      if (labels[s] == cls) count[static_cast<std::size_t>(plan.fold_of[s])]++;
    for (std::size_t f = 0; f < folds; ++f) {
      CHECK(count[f] >= total / folds);
      CHECK(count[f] <= total / folds + 1);
    }
  }
}

TEST_CASE("fold plan rejects classes smaller than the fold count") {
  std::vector<int> labels = {0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  CHECK_THROWS_WITH_AS(make_fold_plan(labels, 5, 1),
                       doctest::Contains("fewer folds"), DataError);
}

TEST_CASE("report aggregates are recomputable from the per-fold values") {
  const Cohort cohort = small_cohort(10, 0.5, 200);
  const CvOutcome out = cross_validate(cohort, quick_config(), 5, 7);
  const EvalReport &rep = out.report;
  CHECK(rep.fold_accuracy.size() == 5);
  CHECK(std::abs(rep.mean_accuracy - mean(rep.fold_accuracy)) < 1e-12);
  CHECK(std::abs(rep.std_accuracy - sample_std(rep.fold_accuracy)) < 1e-12);
  CHECK(std::abs(rep.mean_auc - mean(rep.fold_auc)) < 1e-12);
  for (double a : rep.fold_accuracy) {
    CHECK(a >= 0.0);
    CHECK(a <= 100.0);
  }
  for (const auto &alpha : rep.fold_alpha) CHECK(alpha.size() == 2);
}

TEST_CASE("cross-validation is deterministic for a fixed seed") {
  const Cohort cohort = small_cohort(8, 0.4, 201);
  const CvOutcome a = cross_validate(cohort, quick_config(), 4, 11);
  const CvOutcome b = cross_validate(cohort, quick_config(), 4, 11);
  CHECK(a.report.fold_accuracy == b.report.fold_accuracy);
  CHECK(a.report.fold_auc == b.report.fold_auc);
  for (std::size_t f = 0; f < 4; ++f)
    CHECK(a.folds[f].result.params.fcn_weights.data ==
          b.folds[f].result.params.fcn_weights.data);
}

TEST_CASE("parallel fold jobs reproduce the serial results bitwise") {
  const Cohort cohort = small_cohort(8, 0.4, 202);
  const CvOutcome serial = cross_validate(cohort, quick_config(), 4, 13, 1);
  const CvOutcome parallel = cross_validate(cohort, quick_config(), 4, 13, 2);
  CHECK(serial.report.fold_accuracy == parallel.report.fold_accuracy);
  CHECK(serial.report.fold_auc == parallel.report.fold_auc);
  for (std::size_t f = 0; f < 4; ++f)
    CHECK(serial.folds[f].result.params.fcn_weights.data ==
          parallel.folds[f].result.params.fcn_weights.data);
}

TEST_CASE("singleton grids return their single run as best") {
  const Cohort cohort = small_cohort(8, 0.4, 203);
  const GridResult grid =
      grid_search(cohort, quick_config(), {3}, {6}, {6}, 4, 5);
  CHECK(grid.table.size() == 1);
  CHECK(grid.best_config.k_neighbors == 3);
  CHECK(grid.best_config.train.batch_size == 6);
  CHECK(grid.best_config.train.d_out == 6);
}

TEST_CASE("best grid entry matches its standalone rerun") {
  const Cohort cohort = small_cohort(8, 0.5, 204);
  const GridResult grid =
      grid_search(cohort, quick_config(), {2, 4}, {6}, {4, 6}, 4, 19);
  CHECK(grid.table.size() == 4);
  const CvOutcome rerun =
      cross_validate(cohort, grid.best_config, 4, 19);
  CHECK(rerun.report.mean_val_accuracy ==
        grid.best_report.mean_val_accuracy);
  CHECK(rerun.report.fold_accuracy == grid.best_report.fold_accuracy);
}

TEST_CASE("grid sweep table has one row per grid point") {
  const Cohort cohort = small_cohort(6, 0.5, 205);
  PipelineConfig cfg = quick_config();
  cfg.train.epochs = 2;
  const GridResult grid =
      grid_search(cohort, cfg, {2, 3}, {4, 6, 8}, {4}, 3, 5);
  CHECK(grid.table.size() == 2 * 3 * 1);
}

TEST_CASE("avg-pooling ablation with one modality equals the plain run") {
  SyntheticSpec spec;
  spec.n_nodes = 12;
  spec.subjects_per_class = 8;
  spec.signal_strength = {0.5};
  spec.seed = 206;
  const Cohort cohort = generate_synthetic(spec);
  const PipelineConfig cfg = quick_config();
  const CvOutcome plain = cross_validate(cohort, cfg, 4, 23);
  const CvOutcome avg = ablation(cohort, cfg, AblationKind::kAvgPooling, 0, 4, 23);
  CHECK(plain.report.fold_accuracy == avg.report.fold_accuracy);
  CHECK(plain.report.fold_auc == avg.report.fold_auc);
  for (std::size_t f = 0; f < 4; ++f)
    CHECK(plain.folds[f].result.params.fcn_weights.data ==
          avg.folds[f].result.params.fcn_weights.data);
}

TEST_CASE("single-modality ablation restricts the tensor") {
  const Cohort cohort = small_cohort(8, 0.5, 207);
  const CvOutcome out =
      ablation(cohort, quick_config(), AblationKind::kSingleModality, 1, 4, 29);
  for (const auto &alpha : out.report.fold_alpha) CHECK(alpha.size() == 1);
  CHECK_THROWS_AS(
      ablation(cohort, quick_config(), AblationKind::kSingleModality, 5, 4, 29),
      DataError);
}

TEST_CASE("dropping a pure-noise modality stays within noise of multimodal") {
  SyntheticSpec spec;
  spec.n_nodes = 16;
  spec.subjects_per_class = 25;
  spec.signal_strength = {0.6, 0.0};  // modality 1 is pure noise
  spec.noise_level = 0.1;
  spec.seed = 210;
  const Cohort cohort = generate_synthetic(spec);
  PipelineConfig cfg = quick_config();
  cfg.k_neighbors = 4;
  cfg.train.batch_size = 8;
  cfg.train.epochs = 40;
  cfg.train.d_out = 20;
  const CvOutcome multi = cross_validate(cohort, cfg, 5, 41);
  const CvOutcome solo =
      ablation(cohort, cfg, AblationKind::kSingleModality, 0, 5, 41);
  CHECK(std::abs(multi.report.mean_accuracy - solo.report.mean_accuracy) <=
        10.0);
}

TEST_CASE("no-U1 ablation completes and tags its config echo") {
  const Cohort cohort = small_cohort(8, 0.5, 208);
  const CvOutcome out =
      ablation(cohort, quick_config(), AblationKind::kNoU1, 0, 4, 31);
  CHECK(out.report.config_echo.find("no_u1") != std::string::npos);
  CHECK(out.folds[0].u1.size() == 0);
  CHECK(out.report.fold_accuracy.size() == 4);
}

TEST_CASE("a bad k surfaces as a data error from inside the fold loop") {
  const Cohort cohort = small_cohort(6, 0.5, 211);
  PipelineConfig cfg = quick_config();
  cfg.k_neighbors = 500;
  CHECK_THROWS_AS(cross_validate(cohort, cfg, 3, 1), DataError);
  CHECK_THROWS_AS(cross_validate(cohort, cfg, 3, 1, 2), DataError);
}

TEST_CASE("transductive flag changes the fitted projection") {
  const Cohort cohort = small_cohort(8, 0.5, 209);
  PipelineConfig cfg = quick_config();
  const CvOutcome leak_free = cross_validate(cohort, cfg, 4, 37);
  cfg.transductive = true;
  const CvOutcome transductive = cross_validate(cohort, cfg, 4, 37);
  // same fold plan, different fit set, so U1 must differ
  CHECK(leak_free.folds[0].u1.data != transductive.folds[0].u1.data);
}

TEST_SUITE_END();
