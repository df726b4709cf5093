#include "mgnet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mgnet/error.hpp"
#include "mgnet/rng.hpp"

namespace mgnet {

namespace {

using nlohmann::json;

constexpr double kSymmetryTol = 1e-8;
constexpr const char *kCheckpointHeader = "mgnet-checkpoint v1";

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

double parse_double(const std::string &token, const std::filesystem::path &path,
                    std::size_t line_no) {
  const char *begin = token.c_str();
  char *end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0'))
    throw DataError(path.string() + ": line " + std::to_string(line_no) +
                    ": not a number: '" + token + "'");
  return v;
}

void append_matrix_body(std::string &out, const Matrix &m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
}

// Parses `rows` CSV lines starting at lines[at]; line numbers are 1-based and
// offset for error messages inside container files.
Matrix parse_matrix_lines(const std::vector<std::string> &lines, std::size_t at,
                          std::size_t rows, std::size_t cols,
                          const std::filesystem::path &path) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (at + i >= lines.size())
      throw DataError(path.string() + ": line " + std::to_string(at + i + 1) +
                      ": file truncated, expected " + std::to_string(rows) +
                      " rows");
    std::stringstream ss(lines[at + i]);
    std::string token;
    std::size_t j = 0;
    while (std::getline(ss, token, ',')) {
      if (j >= cols)
        throw DataError(path.string() + ": line " + std::to_string(at + i + 1) +
                        ": expected " + std::to_string(cols) + " values");
      m(i, j++) = parse_double(token, path, at + i + 1);
    }
    if (j != cols)
      throw DataError(path.string() + ": line " + std::to_string(at + i + 1) +
                      ": expected " + std::to_string(cols) + " values, got " +
                      std::to_string(j));
  }
  return m;
}

std::vector<std::string> split_lines(const std::string &content) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : content) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_matrix(const Matrix &m, const std::filesystem::path &path) {
  std::string out;
  out.reserve(m.size() * 20);
  append_matrix_body(out, m);
  write_file(path, out);
}

Matrix load_matrix(const std::filesystem::path &path) {
  const std::vector<std::string> lines = split_lines(read_file(path));
  std::vector<std::string> nonempty;
  for (const std::string &l : lines)
    if (!l.empty()) nonempty.push_back(l);
  if (nonempty.empty()) throw DataError(path.string() + ": empty matrix file");

  std::size_t cols = 1 + static_cast<std::size_t>(std::count(
                             nonempty[0].begin(), nonempty[0].end(), ','));
  return parse_matrix_lines(nonempty, 0, nonempty.size(), cols, path);
}

const Matrix &Checkpoint::get(const std::string &name) const {
  for (const auto &[n, m] : matrices)
    if (n == name) return m;
  throw DataError("checkpoint: missing matrix '" + name + "'");
}

bool Checkpoint::has(const std::string &name) const {
  for (const auto &[n, m] : matrices)
    if (n == name) return true;
  return false;
}

void save_checkpoint(const Checkpoint &c, const std::filesystem::path &path) {
  std::string out = kCheckpointHeader;
  out += '\n';
  out += "config ";
  out += c.config_echo;
  out += '\n';
  for (const auto &[name, m] : c.matrices) {
    out += "matrix " + name + " " + std::to_string(m.rows) + " " +
           std::to_string(m.cols) + "\n";
    append_matrix_body(out, m);
  }
  out += "end\n";
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  const std::vector<std::string> lines = split_lines(read_file(path));
  if (lines.empty() || lines[0] != kCheckpointHeader)
    throw DataError(path.string() + ": not a '" + std::string(kCheckpointHeader) +
                    "' file");
  Checkpoint c;
  std::size_t at = 1;
  if (at >= lines.size() || lines[at].rfind("config ", 0) != 0)
    throw DataError(path.string() + ": line 2: expected 'config <json>'");
  c.config_echo = lines[at].substr(7);
  ++at;
  while (at < lines.size() && lines[at] != "end") {
    std::stringstream ss(lines[at]);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    ss >> tag >> name >> rows >> cols;
    if (tag != "matrix" || ss.fail() || rows == 0 || cols == 0)
      throw DataError(path.string() + ": line " + std::to_string(at + 1) +
                      ": expected 'matrix <name> <rows> <cols>'");
    ++at;
    c.matrices.emplace_back(name, parse_matrix_lines(lines, at, rows, cols, path));
    at += rows;
  }
  if (at >= lines.size())
    throw DataError(path.string() + ": missing 'end' marker (truncated file)");
  return c;
}

Cohort load_cohort(const std::filesystem::path &manifest_path) {
  json doc;
  try {
    doc = json::parse(read_file(manifest_path));
  } catch (const json::exception &e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }

  Cohort cohort;
  try {
    cohort.name = doc.at("name").get<std::string>();
    cohort.modality_names =
        doc.at("modalities").get<std::vector<std::string>>();
    const std::size_t n = doc.at("n_nodes").get<std::size_t>();
    const auto &subjects = doc.at("subjects");
    if (n == 0) throw DataError(manifest_path.string() + ": n_nodes is zero");
    if (cohort.modality_names.empty())
      throw DataError(manifest_path.string() + ": no modalities");
    if (subjects.empty())
      throw DataError(manifest_path.string() + ": no subjects");

    const std::size_t n_mod = cohort.modality_names.size();
    cohort.tensor = Tensor4(n, n, n_mod, subjects.size());

    const std::filesystem::path base = manifest_path.parent_path();
    std::size_t s = 0;
    for (const auto &subj : subjects) {
      const std::string id = subj.at("id").get<std::string>();
      const int label = subj.at("label").get<int>();
      if (label != 0 && label != 1)
        throw DataError(manifest_path.string() + ": subject '" + id +
                        "': label " + std::to_string(label) +
                        " outside {0, 1}");
      const auto &files = subj.at("matrices");
      if (files.size() != n_mod)
        throw DataError(manifest_path.string() + ": subject '" + id +
                        "' lists " + std::to_string(files.size()) +
                        " matrices for " + std::to_string(n_mod) +
                        " modalities");
      for (std::size_t m = 0; m < n_mod; ++m) {
        const std::string &mod = cohort.modality_names[m];
        if (!files.contains(mod))
          throw DataError(manifest_path.string() + ": subject '" + id +
                          "' is missing modality '" + mod + "'");
        const std::filesystem::path mat_path =
            base / files.at(mod).get<std::string>();
        Matrix x;
        try {
          x = load_matrix(mat_path);
        } catch (const DataError &e) {
          throw DataError(std::string(e.what()) + " (subject '" + id + "')");
        }
        if (x.rows != n || x.cols != n)
          throw DataError(mat_path.string() + ": subject '" + id + "': matrix is " +
                          std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                          ", expected " + std::to_string(n) + "x" +
                          std::to_string(n));
        if (!all_finite(x.data))
          throw DataError(mat_path.string() + ": subject '" + id +
                          "': matrix has non-finite entries");
        double asym = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j)
            asym = std::max(asym, std::abs(x(i, j) - x(j, i)));
        if (asym > kSymmetryTol)
          throw DataError(mat_path.string() + ": subject '" + id +
                          "': matrix asymmetry " + format_double(asym) +
                          " exceeds " + format_double(kSymmetryTol));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            cohort.tensor(i, j, m, s) = 0.5 * (x(i, j) + x(j, i));
      }
      cohort.subject_ids.push_back(id);
      cohort.labels.push_back(label);
      ++s;
    }
  } catch (const json::exception &e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }

  const std::size_t ones = static_cast<std::size_t>(
      std::count(cohort.labels.begin(), cohort.labels.end(), 1));
  if (ones == 0 || ones == cohort.labels.size())
    throw DataError(manifest_path.string() +
                    ": cohort needs at least one subject per class");
  return cohort;
}

Cohort generate_synthetic(const SyntheticSpec &spec) {
  if (spec.n_nodes < 4)
    throw DataError("generate_synthetic: need at least 4 nodes");
  if (spec.subjects_per_class < 2)
    throw DataError("generate_synthetic: need at least 2 subjects per class");
  if (spec.signal_strength.empty())
    throw DataError("generate_synthetic: need at least one modality");
  for (double s : spec.signal_strength)
    if (s < 0.0)
      throw DataError("generate_synthetic: signal strength must be >= 0");
  if (spec.noise_level < 0.0)
    throw DataError("generate_synthetic: noise level must be >= 0");

  const std::size_t n = spec.n_nodes;
  const std::size_t n_mod = spec.signal_strength.size();
  const std::size_t n_subj = 2 * spec.subjects_per_class;
  const std::size_t block = n / 2;

  Cohort cohort;
  cohort.name = spec.name;
  cohort.tensor = Tensor4(n, n, n_mod, n_subj);
  for (std::size_t m = 0; m < n_mod; ++m)
    cohort.modality_names.push_back("mod" + std::to_string(m));

  for (std::size_t s = 0; s < n_subj; ++s) {
    const int label = s < spec.subjects_per_class ? 0 : 1;
    cohort.labels.push_back(label);
    char id[32];
    std::snprintf(id, sizeof(id), "subj%04zu", s);
    cohort.subject_ids.push_back(id);

    const double cross = label == 0 ? spec.cross_block_weight_class0
                                    : spec.cross_block_weight_class1;
    for (std::size_t m = 0; m < n_mod; ++m) {
      // Noise depends only on (subject index, modality, seed), never on the
      // label, so zero-signal cohorts are class-identical by construction.
      Rng rng(derive_seed(spec.seed, seed_stage::kSyntheticNoise, s, m));
      const double strength = spec.signal_strength[m];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const bool same_block = (i < block) == (j < block);
          const double pattern =
              same_block ? spec.within_block_weight : cross;
          const double v =
              strength * pattern + spec.noise_level * rng.normal();
          cohort.tensor(i, j, m, s) = v;
          cohort.tensor(j, i, m, s) = v;
        }
    }
  }
  return cohort;
}

void save_cohort(const Cohort &cohort, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);

  json subjects = json::array();
  for (std::size_t s = 0; s < cohort.n_subjects(); ++s) {
    json files = json::object();
    for (std::size_t m = 0; m < cohort.n_modalities(); ++m) {
      const std::string file = cohort.subject_ids[s] + "_" +
                               cohort.modality_names[m] + ".csv";
      save_matrix(cohort.tensor.slice(m, s), dir / file);
      files[cohort.modality_names[m]] = file;
    }
    subjects.push_back({{"id", cohort.subject_ids[s]},
                        {"label", cohort.labels[s]},
                        {"matrices", files}});
  }

  const json doc = {{"name", cohort.name},
                    {"n_nodes", cohort.n_nodes()},
                    {"modalities", cohort.modality_names},
                    {"subjects", subjects}};
  write_file(dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace mgnet
