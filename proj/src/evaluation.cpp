#include "mgnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "mgnet/error.hpp"
#include "mgnet/projection.hpp"
#include "mgnet/rng.hpp"

namespace mgnet {

namespace {

using nlohmann::json;

std::vector<std::size_t> sorted_union(const std::vector<std::size_t> &a,
                                      const std::vector<std::size_t> &b) {
  std::vector<std::size_t> out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

json config_to_json(const PipelineConfig &cfg, std::size_t folds,
                    std::uint64_t seed) {
  return json{{"k_neighbors", cfg.k_neighbors},
              {"tau", cfg.tau},
              {"sigma", cfg.sigma.has_value() ? json(*cfg.sigma) : json()},
              {"transductive", cfg.transductive},
              {"ablation", ablation_name(cfg.ablation)},
              {"ablation_modality", cfg.ablation_modality},
              {"folds", folds},
              {"seed", seed},
              {"lr", cfg.train.lr},
              {"epochs", cfg.train.epochs},
              {"batch_size", cfg.train.batch_size},
              {"dropout", cfg.train.dropout_rate},
              {"layers", cfg.train.layers},
              {"d_out", cfg.train.d_out},
              {"loss", loss_kind_name(cfg.train.loss)},
              {"smooth_l1_weight", cfg.train.smooth_l1_weight}};
}

// Mean connectivity matrix over the given subjects and all modalities; node
// descriptors for the no-U1 ablation graph.
Matrix mean_connectivity(const Tensor4 &x, const std::vector<std::size_t> &subjects) {
  Matrix mean(x.d0, x.d1);
  for (std::size_t i = 0; i < x.d0; ++i)
    for (std::size_t j = 0; j < x.d1; ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < x.d2; ++m)
        for (std::size_t s : subjects) acc += x(i, j, m, s);
      mean(i, j) = acc / static_cast<double>(x.d2 * subjects.size());
    }
  return mean;
}

FoldArtifacts run_fold(const Cohort &cohort, const FoldPlan &plan,
                       std::size_t fold, const PipelineConfig &cfg,
                       std::uint64_t fold_seed) {
  FoldArtifacts art;
  art.test_idx = plan.test_indices(fold);
  const std::vector<std::size_t> val = plan.val_indices(fold);
  const std::vector<std::size_t> train_set = plan.train_indices(fold);

  std::vector<std::size_t> fit;
  if (cfg.transductive) {
    fit.resize(cohort.n_subjects());
    std::iota(fit.begin(), fit.end(), 0);
  } else {
    fit = sorted_union(train_set, val);
  }

  Tensor4 h0;
  if (cfg.ablation == AblationKind::kNoU1) {
    h0 = cohort.tensor;
    const Matrix descriptors = mean_connectivity(cohort.tensor, fit);
    const PopulationGraph g =
        build_population_graph(descriptors, cfg.k_neighbors, cfg.sigma);
    art.a_hat = g.normalized;
    art.kernel_width = g.kernel_width;
    art.trunc_rank = 0;
  } else {
    const ProjectionPair pair =
        solve_projections(select_subjects(cohort.tensor, fit), cfg.tau);
    const PopulationGraph g = build_population_graph(
        truncated_u1(pair), cfg.k_neighbors, cfg.sigma);
    h0 = project_features(cohort.tensor, pair.u1);
    art.u1 = pair.u1;
    art.a_hat = g.normalized;
    art.kernel_width = g.kernel_width;
    art.trunc_rank = pair.trunc_rank;
  }

  TrainConfig tc = cfg.train;
  tc.seed = fold_seed;
  tc.freeze_alpha = cfg.train.freeze_alpha ||
                    cfg.ablation == AblationKind::kAvgPooling;
  art.result = train(h0, art.a_hat, cohort.labels, train_set, val, tc);

  const Tensor4 test_tensor = select_subjects(h0, art.test_idx);
  const ForwardTrace t =
      forward(test_tensor, art.a_hat, art.result.params, RunMode::kEval, 0);
  art.test_scores.resize(art.test_idx.size());
  for (std::size_t i = 0; i < art.test_idx.size(); ++i)
    art.test_scores[i] = t.probs(i, 1);
  return art;
}

}  // namespace

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < fold_of.size(); ++s)
    if (static_cast<std::size_t>(fold_of[s]) == fold) out.push_back(s);
  return out;
}

std::vector<std::size_t> FoldPlan::val_indices(std::size_t fold) const {
  return test_indices((fold + 1) % n_folds);
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  const std::size_t val_fold = (fold + 1) % n_folds;
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < fold_of.size(); ++s) {
    const std::size_t f = static_cast<std::size_t>(fold_of[s]);
    if (f != fold && f != val_fold) out.push_back(s);
  }
  return out;
}

FoldPlan make_fold_plan(const std::vector<int> &labels, std::size_t n_folds,
                        std::uint64_t seed) {
  if (n_folds < 3)
    throw DataError("make_fold_plan: need at least 3 folds for disjoint "
                    "train/validation/test splits");
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.fold_of.assign(labels.size(), -1);
  Rng rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t s = 0; s < labels.size(); ++s)
      if (labels[s] == cls) members.push_back(s);
    if (members.size() < n_folds)
      throw DataError("make_fold_plan: class " + std::to_string(cls) + " has " +
                      std::to_string(members.size()) + " subjects but " +
                      std::to_string(n_folds) +
                      " folds were requested; use fewer folds");
    rng.shuffle(members);
    for (std::size_t t = 0; t < members.size(); ++t)
      plan.fold_of[members[t]] = static_cast<int>(t % n_folds);
  }
  return plan;
}

double accuracy(const Matrix &probs, const std::vector<int> &labels) {
  if (probs.rows != labels.size() || labels.empty())
    throw ShapeError("accuracy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(probs.rows) +
                     " prediction rows");
  std::size_t correct = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const int pred = probs(s, 1) > probs(s, 0) ? 1 : 0;
    if (pred == labels[s]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(labels.size());
}

double auc(const std::vector<double> &scores, const std::vector<int> &labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ShapeError("auc: scores and labels must have equal nonzero length");
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("auc: labels must be 0 or 1");
    (y == 1 ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0)
    throw DataError("auc: undefined when only one class is present");

  // Average ranks; U stays a half-integer, exact in double.
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>((i + 1) + (j + 1));
    for (std::size_t q = i; q <= j; ++q) rank[order[q]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (std::size_t s = 0; s < n; ++s)
    if (labels[s] == 1) rank_sum_pos += rank[s];
  const double u = rank_sum_pos -
                   0.5 * static_cast<double>(n_pos) *
                       static_cast<double>(n_pos + 1);
  return 100.0 * u /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::string ablation_name(AblationKind kind) {
  switch (kind) {
    case AblationKind::kNone: return "none";
    case AblationKind::kSingleModality: return "single_modality";
    case AblationKind::kAvgPooling: return "avg_pooling";
    case AblationKind::kNoU1: return "no_u1";
  }
  return "none";
}

double mean(const std::vector<double> &v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

double sample_std(const std::vector<double> &v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

CvOutcome cross_validate(const Cohort &cohort, const PipelineConfig &config,
                         std::size_t folds, std::uint64_t seed, int jobs) {
  const FoldPlan plan = make_fold_plan(
      cohort.labels, folds, derive_seed(seed, seed_stage::kFoldPlan));

  CvOutcome out;
  out.folds.resize(folds);
  std::vector<std::exception_ptr> errors(folds);

#ifdef _OPENMP
  if (jobs > 1) omp_set_max_active_levels(1);  // fold jobs suppress kernel teams
#endif

  // Folds are independent; results land in per-fold slots so the merge order
  // never depends on scheduling. Exceptions may not cross the parallel
  // region; the lowest failing fold is rethrown afterwards.
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
  for (std::int64_t f = 0; f < static_cast<std::int64_t>(folds); ++f) {
    try {
      out.folds[static_cast<std::size_t>(f)] = run_fold(
          cohort, plan, static_cast<std::size_t>(f), config,
          derive_seed(seed, seed_stage::kFold, static_cast<std::size_t>(f)));
    } catch (...) {
      errors[static_cast<std::size_t>(f)] = std::current_exception();
    }
  }
  for (const std::exception_ptr &err : errors)
    if (err) std::rethrow_exception(err);

  EvalReport &rep = out.report;
  for (std::size_t f = 0; f < folds; ++f) {
    const FoldArtifacts &art = out.folds[f];
    std::vector<int> test_labels;
    for (std::size_t s : art.test_idx) test_labels.push_back(cohort.labels[s]);
    Matrix probs(art.test_scores.size(), 2);
    for (std::size_t i = 0; i < art.test_scores.size(); ++i) {
      probs(i, 0) = 1.0 - art.test_scores[i];
      probs(i, 1) = art.test_scores[i];
    }
    rep.fold_accuracy.push_back(accuracy(probs, test_labels));
    rep.fold_auc.push_back(auc(art.test_scores, test_labels));
    rep.fold_val_accuracy.push_back(
        art.result.log[art.result.best_epoch - 1].val_acc);
    rep.fold_alpha.push_back(art.result.params.alpha);
  }
  rep.mean_accuracy = mean(rep.fold_accuracy);
  rep.std_accuracy = sample_std(rep.fold_accuracy);
  rep.mean_auc = mean(rep.fold_auc);
  rep.std_auc = sample_std(rep.fold_auc);
  rep.mean_val_accuracy = mean(rep.fold_val_accuracy);
  rep.config_echo = config_to_json(config, folds, seed).dump();
  return out;
}

GridResult grid_search(const Cohort &cohort, const PipelineConfig &base,
                       const std::vector<std::size_t> &k_grid,
                       const std::vector<std::size_t> &batch_grid,
                       const std::vector<std::size_t> &dout_grid,
                       std::size_t folds, std::uint64_t seed, int jobs) {
  if (k_grid.empty() || batch_grid.empty() || dout_grid.empty())
    throw DataError("grid_search: all three grids must be non-empty");

  GridResult out;
  bool have_best = false;
  GridRow best_row;

  for (std::size_t k : k_grid)
    for (std::size_t batch : batch_grid)
      for (std::size_t d_out : dout_grid) {
        PipelineConfig cfg = base;
        cfg.k_neighbors = k;
        cfg.train.batch_size = batch;
        cfg.train.d_out = d_out;
        const CvOutcome run = cross_validate(cohort, cfg, folds, seed, jobs);

        GridRow row;
        row.k = k;
        row.batch = batch;
        row.d_out = d_out;
        row.mean_val_accuracy = run.report.mean_val_accuracy;
        row.mean_accuracy = run.report.mean_accuracy;
        row.std_accuracy = run.report.std_accuracy;
        row.mean_auc = run.report.mean_auc;
        row.std_auc = run.report.std_auc;
        out.table.push_back(row);

        const bool better =
            !have_best || row.mean_val_accuracy > best_row.mean_val_accuracy ||
            (row.mean_val_accuracy == best_row.mean_val_accuracy &&
             (row.d_out < best_row.d_out ||
              (row.d_out == best_row.d_out &&
               (row.k < best_row.k ||
                (row.k == best_row.k && row.batch < best_row.batch)))));
        if (better) {
          have_best = true;
          best_row = row;
          out.best_config = cfg;
          out.best_report = run.report;
        }
      }
  return out;
}

CvOutcome ablation(const Cohort &cohort, PipelineConfig config,
                   AblationKind kind, std::size_t modality, std::size_t folds,
                   std::uint64_t seed, int jobs) {
  config.ablation = kind;
  config.ablation_modality = modality;
  if (kind == AblationKind::kSingleModality) {
    if (modality >= cohort.n_modalities())
      throw DataError("ablation: modality " + std::to_string(modality) +
                      " out of range (cohort has " +
                      std::to_string(cohort.n_modalities()) + ")");
    Cohort restricted = cohort;
    restricted.tensor = select_modality(cohort.tensor, modality);
    restricted.modality_names = {cohort.modality_names[modality]};
    return cross_validate(restricted, config, folds, seed, jobs);
  }
  return cross_validate(cohort, config, folds, seed, jobs);
}

}  // namespace mgnet
