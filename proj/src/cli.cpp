#include "mgnet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgnet/checkpoint.hpp"
#include "mgnet/data_io.hpp"
#include "mgnet/error.hpp"
#include "mgnet/evaluation.hpp"
#include "mgnet/projection.hpp"
#include "mgnet/rng.hpp"

namespace mgnet::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string manifest;
  std::string out;
  std::string checkpoint;
  std::size_t k = 6;
  std::size_t d_out = 60;
  std::size_t batch = 8;
  double lr = 0.001;
  std::size_t epochs = 50;
  double dropout = 0.0;
  std::size_t layers = 1;
  std::string loss = "cross_entropy";
  double smooth_l1_weight = 0.1;
  double tau = 0.95;
  double sigma = 0.0;  // 0 means the median heuristic
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool transductive = false;
  std::string ablate;
  std::size_t modality = 0;

  // generate
  std::string name = "synthetic";
  std::size_t nodes = 32;
  std::size_t per_class = 50;
  std::vector<double> signal = {0.5, 0.5};
  double noise = 0.1;
};

std::optional<double> sigma_opt(const Options &o) {
  if (o.sigma == 0.0) return std::nullopt;
  return o.sigma;
}

PipelineConfig pipeline_config(const Options &o) {
  PipelineConfig cfg;
  cfg.k_neighbors = o.k;
  cfg.tau = o.tau;
  cfg.sigma = sigma_opt(o);
  cfg.transductive = o.transductive;
  cfg.train.lr = o.lr;
  cfg.train.epochs = o.epochs;
  cfg.train.batch_size = o.batch;
  cfg.train.dropout_rate = o.dropout;
  cfg.train.layers = o.layers;
  cfg.train.d_out = o.d_out;
  cfg.train.loss = loss_kind_from_name(o.loss);
  cfg.train.smooth_l1_weight = o.smooth_l1_weight;
  cfg.train.seed = o.seed;
  return cfg;
}

json options_to_json(const std::string &subcommand, const Options &o) {
  return json{{"subcommand", subcommand},
              {"manifest", o.manifest},
              {"out", o.out},
              {"checkpoint", o.checkpoint},
              {"k", o.k},
              {"dout", o.d_out},
              {"batch", o.batch},
              {"lr", o.lr},
              {"epochs", o.epochs},
              {"dropout", o.dropout},
              {"layers", o.layers},
              {"loss", o.loss},
              {"smooth_l1_weight", o.smooth_l1_weight},
              {"tau", o.tau},
              {"sigma", o.sigma},
              {"folds", o.folds},
              {"seed", o.seed},
              {"jobs", o.jobs},
              {"transductive", o.transductive},
              {"ablate", o.ablate},
              {"modality", o.modality},
              {"name", o.name},
              {"nodes", o.nodes},
              {"per_class", o.per_class},
              {"signal", o.signal},
              {"noise", o.noise}};
}

void write_text(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

void write_config_echo(const fs::path &dir, const std::string &subcommand,
                       const Options &o) {
  write_text(dir / "config_echo.json",
             options_to_json(subcommand, o).dump(2) + "\n");
}

void write_train_log(const fs::path &path, const std::vector<EpochRecord> &log) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const EpochRecord &r : log) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           format_double(r.train_acc) + "," + format_double(r.val_loss) + "," +
           format_double(r.val_acc) + "\n";
  }
  write_text(path, out);
}

json report_to_json(const EvalReport &rep) {
  json folds = json::array();
  for (std::size_t f = 0; f < rep.fold_accuracy.size(); ++f)
    folds.push_back({{"fold", f},
                     {"accuracy", rep.fold_accuracy[f]},
                     {"auc", rep.fold_auc[f]},
                     {"val_accuracy", rep.fold_val_accuracy[f]},
                     {"alpha", rep.fold_alpha[f]}});
  return json{{"config", json::parse(rep.config_echo)},
              {"folds", folds},
              {"mean_accuracy", rep.mean_accuracy},
              {"std_accuracy", rep.std_accuracy},
              {"mean_auc", rep.mean_auc},
              {"std_auc", rep.std_auc},
              {"mean_val_accuracy", rep.mean_val_accuracy}};
}

std::string report_to_csv(const EvalReport &rep) {
  std::string out = "fold,accuracy,auc,val_accuracy\n";
  for (std::size_t f = 0; f < rep.fold_accuracy.size(); ++f)
    out += std::to_string(f) + "," + format_double(rep.fold_accuracy[f]) + "," +
           format_double(rep.fold_auc[f]) + "," +
           format_double(rep.fold_val_accuracy[f]) + "\n";
  out += "mean," + format_double(rep.mean_accuracy) + "," +
         format_double(rep.mean_auc) + "," +
         format_double(rep.mean_val_accuracy) + "\n";
  out += "std," + format_double(rep.std_accuracy) + "," +
         format_double(rep.std_auc) + ",\n";
  return out;
}

void write_cv_outputs(const fs::path &dir, const CvOutcome &outcome) {
  write_text(dir / "report.json", report_to_json(outcome.report).dump(2) + "\n");
  write_text(dir / "report.csv", report_to_csv(outcome.report));
  for (std::size_t f = 0; f < outcome.folds.size(); ++f) {
    const fs::path fold_dir = dir / ("fold_" + std::to_string(f));
    fs::create_directories(fold_dir);
    const FoldArtifacts &art = outcome.folds[f];
    ModelCheckpoint mc;
    mc.u1 = art.u1;
    mc.a_hat = art.a_hat;
    mc.params = art.result.params;
    json echo = json::parse(outcome.report.config_echo);
    echo["fold"] = f;
    echo["best_epoch"] = art.result.best_epoch;
    echo["trunc_rank"] = art.trunc_rank;
    echo["kernel_width"] = art.kernel_width;
    mc.config_echo = echo.dump();
    save_checkpoint(pack_model(mc), fold_dir / "checkpoint.txt");
    write_train_log(fold_dir / "train_log.csv", art.result.log);
  }
}

int cmd_generate(const Options &o) {
  SyntheticSpec spec;
  spec.name = o.name;
  spec.n_nodes = o.nodes;
  spec.subjects_per_class = o.per_class;
  spec.signal_strength = o.signal;
  spec.noise_level = o.noise;
  spec.seed = o.seed;
  const Cohort cohort = generate_synthetic(spec);
  fs::create_directories(o.out);
  save_cohort(cohort, o.out);
  write_config_echo(o.out, "generate", o);
  std::cout << "wrote " << cohort.n_subjects() << " subjects ("
            << cohort.n_nodes() << " nodes, " << cohort.n_modalities()
            << " modalities) to " << o.out << "\n";
  return 0;
}

int cmd_project(const Options &o) {
  const Cohort cohort = load_cohort(o.manifest);
  const ProjectionPair pair = solve_projections(cohort.tensor, o.tau);
  fs::create_directories(o.out);
  save_matrix(pair.u1, fs::path(o.out) / "u1.csv");
  save_matrix(pair.u2, fs::path(o.out) / "u2.csv");
  Matrix sv(1, pair.singular_values.size());
  for (std::size_t i = 0; i < pair.singular_values.size(); ++i)
    sv(0, i) = pair.singular_values[i];
  save_matrix(sv, fs::path(o.out) / "singular_values.csv");
  const json info = {{"trunc_rank", pair.trunc_rank},
                     {"tau", pair.energy_threshold},
                     {"n_nodes", cohort.n_nodes()}};
  write_text(fs::path(o.out) / "projection.json", info.dump(2) + "\n");
  write_config_echo(o.out, "project", o);
  std::cout << "trunc_rank " << pair.trunc_rank << " of " << cohort.n_nodes()
            << " at tau " << o.tau << "\n";
  return 0;
}

int cmd_train(const Options &o) {
  const Cohort cohort = load_cohort(o.manifest);
  const PipelineConfig cfg = pipeline_config(o);
  const FoldPlan plan = make_fold_plan(
      cohort.labels, o.folds, derive_seed(o.seed, seed_stage::kFoldPlan));

  const std::vector<std::size_t> test = plan.test_indices(0);
  const std::vector<std::size_t> val = plan.val_indices(0);
  const std::vector<std::size_t> train_set = plan.train_indices(0);
  std::vector<std::size_t> fit;
  if (cfg.transductive) {
    fit.resize(cohort.n_subjects());
    for (std::size_t s = 0; s < fit.size(); ++s) fit[s] = s;
  } else {
    fit = train_set;
    fit.insert(fit.end(), val.begin(), val.end());
    std::sort(fit.begin(), fit.end());
  }

  const ProjectionPair pair =
      solve_projections(select_subjects(cohort.tensor, fit), cfg.tau);
  const PopulationGraph graph =
      build_population_graph(truncated_u1(pair), cfg.k_neighbors, cfg.sigma);
  const Tensor4 h0 = project_features(cohort.tensor, pair.u1);

  TrainConfig tc = cfg.train;
  const TrainResult result = train(h0, graph.normalized, cohort.labels,
                                   train_set, val, tc);

  const Tensor4 test_tensor = select_subjects(h0, test);
  std::vector<int> test_labels;
  for (std::size_t s : test) test_labels.push_back(cohort.labels[s]);
  const ForwardTrace t = forward(test_tensor, graph.normalized, result.params,
                                 RunMode::kEval, 0);
  std::vector<double> scores(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) scores[i] = t.probs(i, 1);

  fs::create_directories(o.out);
  save_matrix(graph.adjacency, fs::path(o.out) / "adjacency.csv");
  ModelCheckpoint mc;
  mc.u1 = pair.u1;
  mc.a_hat = graph.normalized;
  mc.params = result.params;
  json echo = options_to_json("train", o);
  echo["best_epoch"] = result.best_epoch;
  echo["trunc_rank"] = pair.trunc_rank;
  echo["kernel_width"] = graph.kernel_width;
  mc.config_echo = echo.dump();
  save_checkpoint(pack_model(mc), fs::path(o.out) / "checkpoint.txt");
  write_train_log(fs::path(o.out) / "train_log.csv", result.log);

  const double test_acc = [&] {
    Matrix probs(scores.size(), 2);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      probs(i, 0) = 1.0 - scores[i];
      probs(i, 1) = scores[i];
    }
    return accuracy(probs, test_labels);
  }();
  const double test_auc = auc(scores, test_labels);
  const json metrics = {{"best_epoch", result.best_epoch},
                        {"test_accuracy", test_acc},
                        {"test_auc", test_auc}};
  write_text(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
  write_config_echo(o.out, "train", o);
  std::cout << "best epoch " << result.best_epoch << ", test accuracy "
            << test_acc << ", test AUC " << test_auc << "\n";
  return 0;
}

int cmd_cv(const Options &o) {
  const Cohort cohort = load_cohort(o.manifest);
  const CvOutcome outcome =
      cross_validate(cohort, pipeline_config(o), o.folds, o.seed, o.jobs);
  fs::create_directories(o.out);
  write_cv_outputs(o.out, outcome);
  write_config_echo(o.out, "cv", o);
  std::printf("accuracy %.2f +/- %.2f, AUC %.2f +/- %.2f\n",
              outcome.report.mean_accuracy, outcome.report.std_accuracy,
              outcome.report.mean_auc, outcome.report.std_auc);
  return 0;
}

int cmd_grid(const Options &o, const std::vector<std::size_t> &k_grid,
             const std::vector<std::size_t> &batch_grid,
             const std::vector<std::size_t> &dout_grid) {
  const Cohort cohort = load_cohort(o.manifest);
  const GridResult grid = grid_search(cohort, pipeline_config(o), k_grid,
                                      batch_grid, dout_grid, o.folds, o.seed,
                                      o.jobs);
  fs::create_directories(o.out);
  std::string csv = "k,batch,dout,mean_val_accuracy,mean_accuracy,std_accuracy,"
                    "mean_auc,std_auc\n";
  for (const GridRow &r : grid.table)
    csv += std::to_string(r.k) + "," + std::to_string(r.batch) + "," +
           std::to_string(r.d_out) + "," + format_double(r.mean_val_accuracy) +
           "," + format_double(r.mean_accuracy) + "," +
           format_double(r.std_accuracy) + "," + format_double(r.mean_auc) +
           "," + format_double(r.std_auc) + "\n";
  write_text(fs::path(o.out) / "grid_table.csv", csv);
  const json best = {{"k", grid.best_config.k_neighbors},
                     {"batch", grid.best_config.train.batch_size},
                     {"dout", grid.best_config.train.d_out},
                     {"report", report_to_json(grid.best_report)}};
  write_text(fs::path(o.out) / "best.json", best.dump(2) + "\n");
  write_config_echo(o.out, "grid", o);
  std::cout << "best: k=" << grid.best_config.k_neighbors
            << " batch=" << grid.best_config.train.batch_size
            << " dout=" << grid.best_config.train.d_out << " (val acc "
            << grid.best_report.mean_val_accuracy << ")\n";
  return 0;
}

int cmd_ablate(const Options &o) {
  const Cohort cohort = load_cohort(o.manifest);
  AblationKind kind;
  if (o.ablate == "single_modality") kind = AblationKind::kSingleModality;
  else if (o.ablate == "avg_pooling") kind = AblationKind::kAvgPooling;
  else if (o.ablate == "no_u1") kind = AblationKind::kNoU1;
  else
    throw DataError("unknown ablation kind '" + o.ablate +
                    "' (expected single_modality, avg_pooling or no_u1)");
  const CvOutcome outcome = ablation(cohort, pipeline_config(o), kind,
                                     o.modality, o.folds, o.seed, o.jobs);
  fs::create_directories(o.out);
  write_cv_outputs(o.out, outcome);
  write_config_echo(o.out, "ablate", o);
  std::printf("%s: accuracy %.2f +/- %.2f, AUC %.2f +/- %.2f\n",
              o.ablate.c_str(), outcome.report.mean_accuracy,
              outcome.report.std_accuracy, outcome.report.mean_auc,
              outcome.report.std_auc);
  return 0;
}

int cmd_export_embeddings(const Options &o) {
  const Cohort cohort = load_cohort(o.manifest);
  const ModelCheckpoint mc = unpack_model(load_checkpoint(o.checkpoint));
  Tensor4 h0;
  if (mc.u1.size() > 0) {
    if (mc.u1.rows != cohort.n_nodes())
      throw DataError("checkpoint u1 has " + std::to_string(mc.u1.rows) +
                      " rows but the cohort has " +
                      std::to_string(cohort.n_nodes()) + " nodes");
    h0 = project_features(cohort.tensor, mc.u1);
  } else {
    h0 = cohort.tensor;
  }
  const ForwardTrace t = forward(h0, mc.a_hat, mc.params, RunMode::kEval, 0);

  const fs::path dir = fs::path(o.out) / "embeddings";
  fs::create_directories(dir);
  std::string index = "subject_id,label,score\n";
  for (std::size_t s = 0; s < cohort.n_subjects(); ++s) {
    save_matrix(t.embedding.slice(s), dir / (cohort.subject_ids[s] + ".csv"));
    index += cohort.subject_ids[s] + "," + std::to_string(cohort.labels[s]) +
             "," + format_double(t.probs(s, 1)) + "\n";
  }
  write_text(fs::path(o.out) / "index.csv", index);
  write_config_echo(o.out, "export-embeddings", o);
  std::cout << "wrote " << cohort.n_subjects() << " embeddings to " << dir
            << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string> &args) {
  CLI::App app{"MGNet: multiplex graph networks for multimodal graph "
               "classification"};
  app.require_subcommand(1);

  Options o;
  std::vector<std::size_t> k_grid = {2, 4, 6, 8, 10, 12};
  std::vector<std::size_t> batch_grid = {2, 4, 6, 8, 10, 12};
  std::vector<std::size_t> dout_grid = {20, 40, 60, 80, 100, 120};

  auto add_common = [&](CLI::App *sub, bool needs_manifest) {
    if (needs_manifest)
      sub->add_option("--manifest", o.manifest, "cohort manifest JSON")
          ->required();
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "RNG seed; every stage derives from it");
    return sub;
  };
  auto add_model_flags = [&](CLI::App *sub) {
    sub->add_option("--k", o.k, "KNN neighbor count");
    sub->add_option("--dout", o.d_out, "GCN output feature size");
    sub->add_option("--batch", o.batch, "mini-batch size");
    sub->add_option("--lr", o.lr, "learning rate");
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--dropout", o.dropout, "dropout rate on the pooled embedding")
        ->check(CLI::Range(0.0, 0.5));
    sub->add_option("--layers", o.layers, "GCN layer count")
        ->check(CLI::Range(std::size_t{1}, std::size_t{3}));
    sub->add_option("--loss", o.loss, "cross_entropy or cross_entropy_plus_smooth_l1")
        ->check(CLI::IsMember({"cross_entropy", "cross_entropy_plus_smooth_l1"}));
    sub->add_option("--smooth-l1-weight", o.smooth_l1_weight,
                    "weight of the auxiliary smooth-L1 term");
    sub->add_option("--tau", o.tau, "energy threshold for truncating U1")
        ->check(CLI::Range(1e-12, 1.0));
    sub->add_option("--sigma", o.sigma,
                    "kernel width; 0 selects the median heuristic");
    sub->add_option("--folds", o.folds, "cross-validation fold count");
    sub->add_flag("--transductive", o.transductive,
                  "fit projection/graph on all subjects including test");
  };

  CLI::App *gen = app.add_subcommand("generate", "write a synthetic cohort");
  add_common(gen, false);
  gen->add_option("--name", o.name, "cohort name");
  gen->add_option("--nodes", o.nodes, "nodes per graph");
  gen->add_option("--per-class", o.per_class, "subjects per class");
  gen->add_option("--signal", o.signal,
                  "per-modality signal strength (repeat or comma-separate)")
      ->delimiter(',');
  gen->add_option("--noise", o.noise, "noise standard deviation");

  CLI::App *proj = app.add_subcommand("project", "write U1/U2/singular values");
  add_common(proj, true);
  proj->add_option("--tau", o.tau, "energy threshold")->check(CLI::Range(1e-12, 1.0));

  CLI::App *tr = app.add_subcommand("train", "train on one 80/10/10 split");
  add_common(tr, true);
  add_model_flags(tr);

  CLI::App *cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
  add_common(cv, true);
  add_model_flags(cv);
  cv->add_option("--jobs", o.jobs, "parallel fold jobs")->check(CLI::PositiveNumber);

  CLI::App *grid = app.add_subcommand("grid", "grid search over K, batch, d_out");
  add_common(grid, true);
  add_model_flags(grid);
  grid->add_option("--jobs", o.jobs, "parallel fold jobs")->check(CLI::PositiveNumber);
  grid->add_option("--k-grid", k_grid, "K values")->delimiter(',');
  grid->add_option("--batch-grid", batch_grid, "batch sizes")->delimiter(',');
  grid->add_option("--dout-grid", dout_grid, "output feature sizes")->delimiter(',');

  CLI::App *abl = app.add_subcommand("ablate", "run an ablation study");
  add_common(abl, true);
  add_model_flags(abl);
  abl->add_option("--jobs", o.jobs, "parallel fold jobs")->check(CLI::PositiveNumber);
  abl->add_option("--ablate", o.ablate,
                  "single_modality, avg_pooling or no_u1")
      ->required();
  abl->add_option("--modality", o.modality,
                  "modality index for single_modality");

  CLI::App *exp = app.add_subcommand("export-embeddings",
                                     "write per-subject pooled embeddings");
  add_common(exp, true);
  exp->add_option("--checkpoint", o.checkpoint, "trained checkpoint file")
      ->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());  // CLI11 pops
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp &e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (proj->parsed()) return cmd_project(o);
    if (tr->parsed()) return cmd_train(o);
    if (cv->parsed()) return cmd_cv(o);
    if (grid->parsed()) return cmd_grid(o, k_grid, batch_grid, dout_grid);
    if (abl->parsed()) return cmd_ablate(o);
    if (exp->parsed()) return cmd_export_embeddings(o);
  } catch (const NumericError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mgnet::cli
