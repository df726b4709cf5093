#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mgnet/tensor.hpp"

namespace mgnet {

// A loaded cohort: connectivity tensor (node, node, modality, subject) plus
// labels and the identifiers from the manifest.
struct Cohort {
  std::string name;
  Tensor4 tensor;
  std::vector<int> labels;                  // one per subject, 0 or 1
  std::vector<std::string> subject_ids;
  std::vector<std::string> modality_names;

  std::size_t n_nodes() const { return tensor.d0; }
  std::size_t n_modalities() const { return tensor.d2; }
  std::size_t n_subjects() const { return tensor.d3; }
};

// Planted two-block cohort. Per subject and modality the matrix is
// signal_strength[m] * P(y) + symmetric Gaussian noise with zero diagonal,
// where P(y) has within_block_weight inside the two node blocks and a
// class-dependent cross-block weight. Zero signal strength gives pure noise.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t n_nodes = 32;
  std::size_t subjects_per_class = 50;
  std::vector<double> signal_strength = {0.5, 0.5};  // one entry per modality
  double noise_level = 0.1;
  double within_block_weight = 1.0;
  double cross_block_weight_class0 = 0.2;
  double cross_block_weight_class1 = 0.7;
  std::uint64_t seed = 0;
};

Cohort load_cohort(const std::filesystem::path &manifest_path);
Cohort generate_synthetic(const SyntheticSpec &spec);

// Writes <dir>/manifest.json plus one CSV per (subject, modality).
void save_cohort(const Cohort &cohort, const std::filesystem::path &dir);

// Matrix text format: one row per line, comma-separated, 17 significant
// digits (round-trips doubles exactly).
void save_matrix(const Matrix &m, const std::filesystem::path &path);
Matrix load_matrix(const std::filesystem::path &path);

std::string format_double(double v);

// Versioned container of named matrices plus a config echo line.
struct Checkpoint {
  std::string config_echo;  // one-line JSON
  std::vector<std::pair<std::string, Matrix>> matrices;  // ordered

  const Matrix &get(const std::string &name) const;
  bool has(const std::string &name) const;
};

void save_checkpoint(const Checkpoint &c, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

}  // namespace mgnet
