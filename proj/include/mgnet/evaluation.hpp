#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgnet/data_io.hpp"
#include "mgnet/graph.hpp"
#include "mgnet/training.hpp"

namespace mgnet {

// Stratified rotating folds: fold f tests on assignment f, validates on
// (f + 1) mod folds and trains on the rest (the 80/10/10 protocol at 10
// folds).
struct FoldPlan {
  std::size_t n_folds = 0;
  std::vector<int> fold_of;  // per subject

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> val_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

FoldPlan make_fold_plan(const std::vector<int> &labels, std::size_t n_folds,
                        std::uint64_t seed);

// Percent of argmax-correct predictions; an exact probability tie goes to
// class 0.
double accuracy(const Matrix &probs, const std::vector<int> &labels);

// Mann-Whitney rank statistic in percent: (concordant + 0.5 ties) /
// (pos * neg) * 100, computed via average ranks.
double auc(const std::vector<double> &scores, const std::vector<int> &labels);

enum class AblationKind { kNone, kSingleModality, kAvgPooling, kNoU1 };

std::string ablation_name(AblationKind kind);

// Everything one cross-validation run needs beyond the cohort itself.
struct PipelineConfig {
  TrainConfig train;
  std::size_t k_neighbors = 6;
  double tau = 0.95;                  // energy threshold for truncating U1
  std::optional<double> sigma;        // kernel width; default median heuristic
  bool transductive = false;          // fit projection/graph on all subjects
  AblationKind ablation = AblationKind::kNone;
  std::size_t ablation_modality = 0;  // for kSingleModality
};

struct EvalReport {
  std::vector<double> fold_accuracy;       // percent, per fold
  std::vector<double> fold_auc;            // percent, per fold
  std::vector<double> fold_val_accuracy;   // best-epoch validation accuracy
  std::vector<std::vector<double>> fold_alpha;
  double mean_accuracy = 0.0, std_accuracy = 0.0;
  double mean_auc = 0.0, std_auc = 0.0;
  double mean_val_accuracy = 0.0;
  std::string config_echo;  // JSON
};

// Per-fold artifacts kept for checkpointing and embedding export.
struct FoldArtifacts {
  TrainResult result;
  Matrix u1;      // empty for the no-U1 ablation
  Matrix a_hat;
  double kernel_width = 0.0;
  std::size_t trunc_rank = 0;
  std::vector<std::size_t> test_idx;
  std::vector<double> test_scores;  // p(class 1) per test subject
};

struct CvOutcome {
  EvalReport report;
  std::vector<FoldArtifacts> folds;
};

// Full harness: stratified folds; per fold the projection and graph are fit
// on train+validation subjects only (or on everything when transductive),
// then the model is trained and scored on the held-out test fold. Folds are
// independent jobs; results are merged by fold index.
CvOutcome cross_validate(const Cohort &cohort, const PipelineConfig &config,
                         std::size_t folds, std::uint64_t seed, int jobs = 1);

struct GridRow {
  std::size_t k = 0, batch = 0, d_out = 0;
  double mean_val_accuracy = 0.0;
  double mean_accuracy = 0.0, std_accuracy = 0.0;
  double mean_auc = 0.0, std_auc = 0.0;
};

struct GridResult {
  PipelineConfig best_config;
  EvalReport best_report;
  std::vector<GridRow> table;  // one row per grid point, sweep order
};

// Exhaustive sweep over K x batch x d_out; selection by mean validation
// accuracy, ties toward smaller d_out, then K, then batch.
GridResult grid_search(const Cohort &cohort, const PipelineConfig &base,
                       const std::vector<std::size_t> &k_grid,
                       const std::vector<std::size_t> &batch_grid,
                       const std::vector<std::size_t> &dout_grid,
                       std::size_t folds, std::uint64_t seed, int jobs = 1);

// kSingleModality restricts the cohort to one modality; kAvgPooling freezes
// alpha at 1/M; kNoU1 skips the projection and builds the graph from rows of
// the mean connectivity matrix.
CvOutcome ablation(const Cohort &cohort, PipelineConfig config,
                   AblationKind kind, std::size_t modality, std::size_t folds,
                   std::uint64_t seed, int jobs = 1);

double mean(const std::vector<double> &v);
double sample_std(const std::vector<double> &v);

}  // namespace mgnet
