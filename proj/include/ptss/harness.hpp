#pragma once

#include "ptss/optim.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ptss {

// ---------------------------------------------------------------------------
// Datasets

struct LabeledData {
  Dataset data;
  Vector labels;
};

/// i.i.d. uniform points in [0, side]^d.
Dataset generate_cube_dataset(Eigen::Index n, Eigen::Index d, double side, RngStream& rng);

/// Standard four-term Franke surface on [0, 1]^2.
double franke(double x, double y);

/// Uniform points in [0, 1]^2 with Franke labels plus N(0, noise_sd^2) noise.
LabeledData generate_franke_dataset(Eigen::Index n, double noise_sd, RngStream& rng);

/// Reads a numeric CSV with a header row. Feature columns are z-scored (std
/// floored at 1e-12) and `subsample_n` rows are drawn without replacement,
/// kept in file order. subsample_n <= 0 keeps every row.
LabeledData ingest_csv_dataset(const std::string& path, const std::string& label_column, Eigen::Index subsample_n,
                               RngStream& rng);

// ---------------------------------------------------------------------------
// Methods: "exact", "NP-TSS", "PC-TSS", "NP-T-imin", "PC-T-ceil", "NP-T-imax", "PC-T-7", ...

struct MethodSpec {
  bool exact = false;
  bool precond = false;
  bool tss = true;
  /// "imin", "ceil", "imax" or a number; used when !tss.
  std::string truncation;

  static MethodSpec parse(const std::string& s);
  std::string to_string() const;
  /// Truncation length resolved against a distribution.
  int resolve_m(const TruncationDistribution& dist) const;
};

// ---------------------------------------------------------------------------
// Configuration

enum class Experiment { QuadSweep, DistCompare, ReorthVariance, NlmlSweep, Train2d, Train3d };

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& s);

enum class KappaSource { Pilot, Dense };

struct ExperimentConfig {
  Experiment experiment = Experiment::QuadSweep;

  // dataset
  std::string dataset = "cube";  // cube | franke | csv
  Eigen::Index n = 256;
  Eigen::Index d = 3;
  double side = 6.3496042078727978;
  std::string csv_path;
  std::string label_column;
  Eigen::Index subsample_n = 0;
  double noise_sd = 0.1;

  // kernel
  KernelFamily kernel = KernelFamily::Rbf;
  double f = 1.0;
  double mu = 0.01;
  std::vector<double> l_grid;

  // estimators
  int i_min = 5;
  int i_max = 10;
  std::vector<DistributionSpec> dists;
  std::vector<std::string> methods;
  Eigen::Index precond_rank = 32;
  std::vector<ReorthPolicy> reorth;
  std::vector<std::string> quantities;
  int k_z = 1;
  KappaSource kappa_source = KappaSource::Pilot;
  int pilot_steps = 20;
  double rtol = 0.0;

  // replication
  int replicates = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;

  // training
  std::string optimizer = "gd";
  double lr = 0.1;
  int iterations = 1500;
  HyperArray init{1.0, 1.0, 1.0};
  bool init_unconstrained = false;
  std::array<bool, 3> active{false, true, true};
  double true_f = 1.0;
  double true_l = 2.0;
  double true_mu = 0.5;
  bool normalize_loss = true;

  /// Throws on invalid combinations (i_min <= i_max <= n, replicates >= 1, ...).
  void validate() const;
};

/// Desk-scale defaults for an experiment. With `full_scale` the dataset sizes
/// and replicate counts of the full-size runs are used instead.
ExperimentConfig default_config(Experiment e, bool full_scale = false);

/// Sets one field from its textual form. Throws on unknown keys.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines ('#' comments, optional quotes, optional
/// [a, b] list brackets) on top of `cfg`.
void apply_config_text(ExperimentConfig& cfg, const std::string& text);
ExperimentConfig load_config_file(const std::string& path, bool full_scale = false);

/// Ordered key/value echo that reproduces the run (out and threads excluded).
std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig& cfg);

/// Rebuilds a config from the `# key=value` header of an emitted CSV.
ExperimentConfig parse_config_echo(const std::string& csv_text);

// ---------------------------------------------------------------------------
// Statistics

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (R - 1 denominator)
  double se_lo = 0.0;
  double se_hi = 0.0;
  double spread_lo = 0.0;
  double spread_hi = 0.0;
  int count = 0;
};

/// mean +- 1.96 std / sqrt(R) and mean +- 1.96 std.
SummaryStats summarize(const std::vector<double>& values);

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------
// Results

struct SweepPoint {
  double l = 0.0;
  std::string quantity;
  std::string method;
  std::string dist;
  double expected_cost = 0.0;
  double exact = 0.0;
  double kappa = 0.0;
  /// Statistics of (estimate - exact) over successful replicates.
  SummaryStats error;
  /// 1 for raw quantities, 1/n for the per-n columns.
  double scale = 1.0;
  int failures = 0;
  std::string reason;
};

struct TrainRun {
  std::string method;
  Trajectory trajectory;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SweepPoint> points;
  std::vector<TrainRun> runs;
};

ExperimentResult run_quad_sweep(const ExperimentConfig& cfg);
ExperimentResult run_dist_compare(const ExperimentConfig& cfg);
ExperimentResult run_reorth_variance(const ExperimentConfig& cfg);
ExperimentResult run_nlml_sweep(const ExperimentConfig& cfg);
ExperimentResult run_training(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Dense reference values per length-scale: quadratic form, log-determinant,
/// condition numbers, NLML and its gradient.
struct OracleRow {
  double l = 0.0;
  double quad_form = 0.0;
  double logdet = 0.0;
  double kappa = 0.0;
  double kappa_precond = 0.0;
  double nlml = 0.0;
  NlmlGradient grad;
};
std::vector<OracleRow> run_oracle(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

CsvTable to_table(const ExperimentResult& result);
CsvTable to_table(const std::vector<OracleRow>& rows);

/// `# key=value` echo lines, then the header row, then data rows.
void write_csv(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& echo,
               const CsvTable& table);
std::string render_csv(const std::vector<std::pair<std::string, std::string>>& echo, const CsvTable& table);

/// Data rows (after the echo block and header) split into cells.
CsvTable parse_csv_table(const std::string& text);

}  // namespace ptss
