#include "ptss/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace ptss {

namespace {

constexpr std::uint64_t kDatasetStream = 1;
constexpr std::uint64_t kLabelStream = 2;
constexpr std::uint64_t kPilotStream = 3;
constexpr std::uint64_t kTrainStream = 4;
constexpr std::uint64_t kReplicateStream = 5;

std::uint64_t point_seed(std::uint64_t seed, std::uint64_t stream, std::size_t index) {
  return substream_seed(substream_seed(seed, stream), index);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) {
    item = unquote(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw Error("config key '" + key + "': invalid number '" + s + "'");
  }
}

long long to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw Error("config key '" + key + "': invalid integer '" + s + "'");
  }
}

bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error("config key '" + key + "': invalid boolean '" + s + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string strip_brackets(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Datasets

Dataset generate_cube_dataset(Eigen::Index n, Eigen::Index d, double side, RngStream& rng) {
  if (n < 1 || d < 1) throw Error("cube dataset: n and d must be >= 1");
  if (!(side > 0.0)) throw Error("cube dataset: side must be positive");
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = side * uniform01(rng);
  }
  return Dataset(std::move(x));
}

double franke(double x, double y) {
  const double a = 9.0 * x;
  const double b = 9.0 * y;
  return 0.75 * std::exp(-((a - 2) * (a - 2) + (b - 2) * (b - 2)) / 4.0) +
         0.75 * std::exp(-(a + 1) * (a + 1) / 49.0 - (b + 1) / 10.0) +
         0.5 * std::exp(-((a - 7) * (a - 7) + (b - 3) * (b - 3)) / 4.0) -
         0.2 * std::exp(-(a - 4) * (a - 4) - (b - 7) * (b - 7));
}

LabeledData generate_franke_dataset(Eigen::Index n, double noise_sd, RngStream& rng) {
  if (n < 1) throw Error("franke dataset: n must be >= 1");
  if (!(noise_sd >= 0.0)) throw Error("franke dataset: noise_sd must be non-negative");
  Matrix x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = uniform01(rng);
    x(i, 1) = uniform01(rng);
  }
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = franke(x(i, 0), x(i, 1));
  if (noise_sd > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) y[i] += noise_sd * standard_normal(rng);
  }
  return {Dataset(std::move(x)), std::move(y)};
}

LabeledData ingest_csv_dataset(const std::string& path, const std::string& label_column, Eigen::Index subsample_n,
                               RngStream& rng) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error("dataset file '" + path + "' is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(unquote(cell));
  }
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) throw Error("label column '" + label_column + "' not found in '" + path + "'");
  const auto label_idx = static_cast<std::size_t>(it - header.begin());
  if (header.size() < 2) throw Error("dataset '" + path + "' needs at least one feature column");

  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string c = unquote(cell);
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v)) {
        throw Error("'" + path + "' line " + std::to_string(line_no) + " column " + std::to_string(row.size() + 1) +
                    ": non-numeric cell '" + c + "'");
      }
      row.push_back(v);
    }
    if (row.size() != header.size()) {
      throw Error("'" + path + "' line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                  " cells, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("dataset '" + path + "' has no data rows");

  const auto total = static_cast<Eigen::Index>(rows.size());
  const auto nfeat = static_cast<Eigen::Index>(header.size() - 1);
  Matrix x(total, nfeat);
  Vector y(total);
  for (Eigen::Index i = 0; i < total; ++i) {
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j == label_idx) {
        y[i] = rows[static_cast<std::size_t>(i)][j];
      } else {
        x(i, c++) = rows[static_cast<std::size_t>(i)][j];
      }
    }
  }
  for (Eigen::Index j = 0; j < nfeat; ++j) {
    const double mean = x.col(j).mean();
    x.col(j).array() -= mean;
    const double var = total > 1 ? x.col(j).squaredNorm() / static_cast<double>(total - 1) : 0.0;
    x.col(j) /= std::max(std::sqrt(var), 1e-12);
  }

  if (subsample_n > total) {
    throw Error("subsample_n=" + std::to_string(subsample_n) + " exceeds the " + std::to_string(total) +
                " rows of '" + path + "'");
  }
  if (subsample_n <= 0 || subsample_n == total) return {Dataset(std::move(x)), std::move(y)};

  // Partial Fisher-Yates, then restore file order.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  for (Eigen::Index k = 0; k < subsample_n; ++k) {
    const auto span = static_cast<std::uint64_t>(total - k);
    const auto pick = k + static_cast<Eigen::Index>(rng() % span);
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick)]);
  }
  idx.resize(static_cast<std::size_t>(subsample_n));
  std::sort(idx.begin(), idx.end());
  Matrix xs(subsample_n, nfeat);
  Vector ys(subsample_n);
  for (Eigen::Index k = 0; k < subsample_n; ++k) {
    xs.row(k) = x.row(idx[static_cast<std::size_t>(k)]);
    ys[k] = y[idx[static_cast<std::size_t>(k)]];
  }
  return {Dataset(std::move(xs)), std::move(ys)};
}

// ---------------------------------------------------------------------------
// Methods

MethodSpec MethodSpec::parse(const std::string& s) {
  MethodSpec m;
  if (s == "exact") {
    m.exact = true;
    return m;
  }
  const auto parts = split(s, '-');
  auto bad = [&] {
    return Error("unknown method '" + s + "' (expected exact, NP-TSS, PC-TSS, NP-T-imin, PC-T-ceil, NP-T-<m>, ...)");
  };
  if (parts.size() < 2) throw bad();
  if (parts[0] == "NP") {
    m.precond = false;
  } else if (parts[0] == "PC") {
    m.precond = true;
  } else {
    throw bad();
  }
  if (parts[1] == "TSS" && parts.size() == 2) {
    m.tss = true;
  } else if (parts[1] == "T" && parts.size() == 3) {
    m.tss = false;
    m.truncation = parts[2];
    if (m.truncation != "imin" && m.truncation != "ceil" && m.truncation != "imax") {
      if (to_int(m.truncation, "methods") < 1) throw bad();
    }
  } else {
    throw bad();
  }
  return m;
}

std::string MethodSpec::to_string() const {
  if (exact) return "exact";
  std::string s = precond ? "PC-" : "NP-";
  return tss ? s + "TSS" : s + "T-" + truncation;
}

int MethodSpec::resolve_m(const TruncationDistribution& dist) const {
  if (truncation == "imin") return dist.i_min();
  if (truncation == "imax") return dist.i_max();
  if (truncation == "ceil") return dist.ceil_expected_q();
  return static_cast<int>(to_int(truncation, "methods"));
}

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::QuadSweep: return "quad-sweep";
    case Experiment::DistCompare: return "dist-compare";
    case Experiment::ReorthVariance: return "reorth-variance";
    case Experiment::NlmlSweep: return "nlml-sweep";
    case Experiment::Train2d: return "train-2d";
    case Experiment::Train3d: return "train-3d";
  }
  return "?";
}

Experiment parse_experiment(const std::string& s) {
  for (Experiment e : {Experiment::QuadSweep, Experiment::DistCompare, Experiment::ReorthVariance,
                       Experiment::NlmlSweep, Experiment::Train2d, Experiment::Train3d}) {
    if (to_string(e) == s) return e;
  }
  throw Error("unknown experiment '" + s + "'");
}

namespace {

std::vector<double> linear_grid(double lo, double hi, int count) {
  std::vector<double> g;
  for (int i = 0; i < count; ++i) g.push_back(lo + (hi - lo) * i / (count - 1));
  return g;
}

// Side of a cube holding n points at the density of n_ref points in [0, side_ref]^3.
double scaled_side(double side_ref, double n_ref, double n) { return side_ref * std::cbrt(n / n_ref); }

}  // namespace

ExperimentConfig default_config(Experiment e, bool full_scale) {
  ExperimentConfig c;
  c.experiment = e;
  c.dists = {DistributionSpec::parse("exp:0.5")};
  c.reorth = {ReorthPolicy::full()};
  switch (e) {
    case Experiment::QuadSweep:
      // Full-size geometry with the nugget shrunk in proportion to n, so the
      // spectrum of K / mu stays close to the full-size one.
      c.n = full_scale ? 4096 : 256;
      c.side = 16.0;
      c.mu = 0.01 * static_cast<double>(c.n) / 4096.0;
      c.l_grid = linear_grid(1.0, 10.0, 10);
      c.i_min = 5;
      c.i_max = 10;
      c.precond_rank = 32;
      c.methods = {"PC-TSS", "PC-T-imin", "PC-T-ceil", "PC-T-imax"};
      c.replicates = 10000;
      break;
    case Experiment::DistCompare:
      c.n = full_scale ? 4096 : 256;
      c.side = scaled_side(16.0, 4096.0, static_cast<double>(c.n));
      c.l_grid = full_scale ? linear_grid(1.0, 10.0, 10) : linear_grid(2.0, 10.0, 9);
      c.i_min = 5;
      c.i_max = 15;
      c.precond_rank = 64;
      c.rtol = 1e-10;
      c.dists = {DistributionSpec::parse("exp:0.5"), DistributionSpec::parse("geom"),
                 DistributionSpec::parse("gamma-opt-solve")};
      c.methods = {"NP-TSS", "PC-TSS"};
      c.replicates = 10000;
      break;
    case Experiment::ReorthVariance:
      c.n = full_scale ? 1024 : 256;
      c.side = scaled_side(10.0, 1024.0, static_cast<double>(c.n));
      c.l_grid = linear_grid(2.0, 5.0, 4);
      c.i_min = 30;
      c.i_max = 50;
      c.precond_rank = 0;
      c.methods = {"NP-TSS"};
      c.reorth = {ReorthPolicy::window(2), ReorthPolicy::window(5), ReorthPolicy::window(10),
                  ReorthPolicy::window(20), ReorthPolicy::full()};
      c.quantities = {"quad", "logqf", "logdet"};
      c.replicates = 1000;
      break;
    case Experiment::NlmlSweep:
      c.n = full_scale ? 4096 : 256;
      c.side = scaled_side(16.0, 4096.0, static_cast<double>(c.n));
      c.l_grid = linear_grid(1.0, 10.0, 10);
      c.i_min = 5;
      c.i_max = 15;
      c.precond_rank = 64;
      c.methods = {"PC-TSS", "NP-TSS", "PC-T-imin", "PC-T-ceil", "PC-T-imax"};
      c.replicates = 100;
      break;
    case Experiment::Train2d:
      c.n = 200;
      c.side = std::cbrt(200.0);
      c.i_min = 5;
      c.i_max = 15;
      c.precond_rank = 0;
      c.methods = {"exact", "NP-TSS", "NP-T-imin", "NP-T-ceil", "NP-T-imax"};
      c.optimizer = "gd";
      c.lr = 0.1;
      c.iterations = 1500;
      c.init = {1.0, 1.0, 1.0};
      c.init_unconstrained = false;
      c.active = {false, true, true};
      c.replicates = 1;
      break;
    case Experiment::Train3d:
      c.dataset = "franke";
      c.n = full_scale ? 4096 : 256;
      c.d = 2;
      c.kernel = KernelFamily::Matern32;
      c.i_min = 5;
      c.i_max = 15;
      c.precond_rank = 64;
      c.methods = {"exact", "NP-TSS", "PC-TSS"};
      c.optimizer = "adam";
      c.lr = 0.01;
      c.iterations = 1000;
      c.init = {0.0, 0.0, 0.0};
      c.init_unconstrained = true;
      c.active = {true, true, true};
      c.replicates = 1;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (dataset != "cube" && dataset != "franke" && dataset != "csv") {
    throw Error("dataset must be cube, franke or csv (got '" + dataset + "')");
  }
  if (dataset == "csv" && (csv_path.empty() || label_column.empty())) {
    throw Error("csv dataset needs csv_path and label_column");
  }
  if (dataset != "csv" && (n < 1 || d < 1)) throw Error("n and d must be >= 1");
  if (n > kDefaultOracleCap) throw Error("n=" + std::to_string(n) + " exceeds the desk-scale cap of 4096");
  if (!(side > 0.0)) throw Error("side must be positive");
  if (i_min < 1 || i_min > i_max) throw Error("need 1 <= i_min <= i_max");
  const Eigen::Index n_eff = dataset == "csv" && subsample_n > 0 ? subsample_n : n;
  if (dataset != "csv" && i_max > n_eff) throw Error("i_max exceeds n");
  if (replicates < 1) throw Error("replicates must be >= 1");
  if (threads < 1) throw Error("threads must be >= 1");
  if (k_z < 1) throw Error("k_z must be >= 1");
  if (precond_rank < 0) throw Error("precond_rank must be >= 0");
  if (dists.empty()) throw Error("at least one distribution is required");
  if (methods.empty()) throw Error("at least one method is required");
  for (const auto& m : methods) MethodSpec::parse(m);
  if (reorth.empty()) throw Error("at least one reorthogonalization policy is required");
  const bool train = experiment == Experiment::Train2d || experiment == Experiment::Train3d;
  if (!train && l_grid.empty()) throw Error("l_grid must not be empty");
  for (double l : l_grid) {
    if (!(l > 0.0)) throw Error("l_grid entries must be positive");
  }
  for (const auto& q : quantities) {
    if (q != "quad" && q != "logdet" && q != "logqf") throw Error("quantities entries must be quad, logqf or logdet");
  }
  if (train) {
    if (optimizer != "gd" && optimizer != "adam") throw Error("optimizer must be gd or adam");
    if (iterations < 1) throw Error("iterations must be >= 1");
    if (!(lr > 0.0)) throw Error("lr must be positive");
  }
  KernelSpec{kernel, f, 1.0, mu}.validate();
}

void apply_setting(ExperimentConfig& c, const std::string& key_in, const std::string& raw) {
  const std::string key = trim(key_in);
  const std::string v = strip_brackets(unquote(raw));
  auto doubles = [&] {
    std::vector<double> out;
    for (const auto& s : split(v, ',')) out.push_back(to_double(s, key));
    return out;
  };
  if (key == "experiment") {
    c.experiment = parse_experiment(v);
  } else if (key == "dataset") {
    c.dataset = v;
  } else if (key == "n") {
    c.n = to_int(v, key);
  } else if (key == "d") {
    c.d = to_int(v, key);
  } else if (key == "side") {
    c.side = to_double(v, key);
  } else if (key == "csv_path") {
    c.csv_path = v;
  } else if (key == "label_column") {
    c.label_column = v;
  } else if (key == "subsample_n") {
    c.subsample_n = to_int(v, key);
  } else if (key == "noise_sd") {
    c.noise_sd = to_double(v, key);
  } else if (key == "kernel") {
    c.kernel = parse_kernel_family(v);
  } else if (key == "f") {
    c.f = to_double(v, key);
  } else if (key == "mu") {
    c.mu = to_double(v, key);
  } else if (key == "l_grid") {
    c.l_grid = doubles();
  } else if (key == "i_min") {
    c.i_min = static_cast<int>(to_int(v, key));
  } else if (key == "i_max") {
    c.i_max = static_cast<int>(to_int(v, key));
  } else if (key == "dists" || key == "dist") {
    c.dists.clear();
    for (const auto& s : split(v, ';')) c.dists.push_back(DistributionSpec::parse(s));
  } else if (key == "methods") {
    c.methods = split(v, ',');
  } else if (key == "precond_rank") {
    c.precond_rank = to_int(v, key);
  } else if (key == "reorth") {
    c.reorth.clear();
    for (const auto& s : split(v, ',')) c.reorth.push_back(ReorthPolicy::parse(s));
  } else if (key == "quantities") {
    c.quantities = split(v, ',');
  } else if (key == "k_z") {
    c.k_z = static_cast<int>(to_int(v, key));
  } else if (key == "kappa_source") {
    if (v == "pilot") {
      c.kappa_source = KappaSource::Pilot;
    } else if (v == "dense") {
      c.kappa_source = KappaSource::Dense;
    } else {
      throw Error("kappa_source must be pilot or dense");
    }
  } else if (key == "pilot_steps") {
    c.pilot_steps = static_cast<int>(to_int(v, key));
  } else if (key == "rtol") {
    c.rtol = to_double(v, key);
  } else if (key == "replicates") {
    c.replicates = static_cast<int>(to_int(v, key));
  } else if (key == "seed") {
    try {
      std::size_t pos = 0;
      c.seed = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::logic_error&) {
      throw Error("config key 'seed': invalid unsigned integer '" + v + "'");
    }
  } else if (key == "threads") {
    c.threads = static_cast<int>(to_int(v, key));
  } else if (key == "out") {
    c.out = v;
  } else if (key == "optimizer") {
    c.optimizer = v;
  } else if (key == "lr") {
    c.lr = to_double(v, key);
  } else if (key == "iterations") {
    c.iterations = static_cast<int>(to_int(v, key));
  } else if (key == "init") {
    const auto vals = doubles();
    if (vals.size() != 3) throw Error("init needs three values f,l,mu");
    c.init = {vals[0], vals[1], vals[2]};
  } else if (key == "init_space") {
    if (v == "constrained") {
      c.init_unconstrained = false;
    } else if (v == "unconstrained") {
      c.init_unconstrained = true;
    } else {
      throw Error("init_space must be constrained or unconstrained");
    }
  } else if (key == "active") {
    c.active = {false, false, false};
    for (const auto& s : split(v, ',')) c.active[static_cast<std::size_t>(parse_hyper(s))] = true;
  } else if (key == "true_f") {
    c.true_f = to_double(v, key);
  } else if (key == "true_l") {
    c.true_l = to_double(v, key);
  } else if (key == "true_mu") {
    c.true_mu = to_double(v, key);
  } else if (key == "normalize_loss") {
    c.normalize_loss = to_bool(v, key);
  } else {
    throw Error("unknown config key '" + key + "'");
  }
}

void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    std::string value = t.substr(eq + 1);
    // Trailing comments outside quotes.
    if (const auto hash = value.find(" #"); hash != std::string::npos) value = value.substr(0, hash);
    apply_setting(cfg, t.substr(0, eq), value);
  }
}

ExperimentConfig load_config_file(const std::string& path, bool full_scale) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  // The experiment key selects the defaults, so it is applied first.
  ExperimentConfig probe;
  apply_config_text(probe, text);
  ExperimentConfig cfg = default_config(probe.experiment, full_scale);
  apply_config_text(cfg, text);
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig& c) {
  auto doubles = [](const auto& xs) {
    std::vector<std::string> s;
    for (double x : xs) s.push_back(format_double(x));
    return join(s, ',');
  };
  std::vector<std::string> dists;
  for (const auto& d : c.dists) dists.push_back(d.to_string());
  std::vector<std::string> reorth;
  for (const auto& r : c.reorth) reorth.push_back(r.to_string());
  std::vector<std::string> active;
  for (Hyper h : kAllHypers) {
    if (c.active[static_cast<std::size_t>(h)]) active.emplace_back(to_string(h));
  }
  return {
      {"experiment", to_string(c.experiment)},
      {"dataset", c.dataset},
      {"n", std::to_string(c.n)},
      {"d", std::to_string(c.d)},
      {"side", format_double(c.side)},
      {"csv_path", c.csv_path},
      {"label_column", c.label_column},
      {"subsample_n", std::to_string(c.subsample_n)},
      {"noise_sd", format_double(c.noise_sd)},
      {"kernel", std::string(to_string(c.kernel))},
      {"f", format_double(c.f)},
      {"mu", format_double(c.mu)},
      {"l_grid", doubles(c.l_grid)},
      {"i_min", std::to_string(c.i_min)},
      {"i_max", std::to_string(c.i_max)},
      {"dists", join(dists, ';')},
      {"methods", join(c.methods, ',')},
      {"precond_rank", std::to_string(c.precond_rank)},
      {"reorth", join(reorth, ',')},
      {"quantities", join(c.quantities, ',')},
      {"k_z", std::to_string(c.k_z)},
      {"kappa_source", c.kappa_source == KappaSource::Pilot ? "pilot" : "dense"},
      {"pilot_steps", std::to_string(c.pilot_steps)},
      {"rtol", format_double(c.rtol)},
      {"replicates", std::to_string(c.replicates)},
      {"seed", std::to_string(c.seed)},
      {"optimizer", c.optimizer},
      {"lr", format_double(c.lr)},
      {"iterations", std::to_string(c.iterations)},
      {"init", doubles(c.init)},
      {"init_space", c.init_unconstrained ? "unconstrained" : "constrained"},
      {"active", join(active, ',')},
      {"true_f", format_double(c.true_f)},
      {"true_l", format_double(c.true_l)},
      {"true_mu", format_double(c.true_mu)},
      {"normalize_loss", from_bool(c.normalize_loss)},
  };
}

ExperimentConfig parse_config_echo(const std::string& csv_text) {
  std::stringstream ss(csv_text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> kv;
  while (std::getline(ss, line)) {
    if (line.rfind("# ", 0) != 0) break;
    const std::string body = line.substr(2);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error("malformed echo line '" + line + "'");
    kv.emplace_back(body.substr(0, eq), body.substr(eq + 1));
  }
  if (kv.empty() || kv.front().first != "experiment") throw Error("no config echo found");
  ExperimentConfig cfg = default_config(parse_experiment(kv.front().second));
  for (const auto& [k, v] : kv) {
    // Empty lists are echoed as empty values; apply them verbatim.
    if (v.empty()) {
      if (k == "l_grid") {
        cfg.l_grid.clear();
      } else if (k == "quantities") {
        cfg.quantities.clear();
      } else if (k == "active") {
        cfg.active = {false, false, false};
      } else if (k == "csv_path") {
        cfg.csv_path.clear();
      } else if (k == "label_column") {
        cfg.label_column.clear();
      } else {
        apply_setting(cfg, k, v);
      }
      continue;
    }
    apply_setting(cfg, k, v);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Statistics

SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = s.std = s.se_lo = s.se_hi = s.spread_lo = s.spread_hi = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = s.count > 1 ? std::sqrt(ss / (s.count - 1)) : 0.0;
  const double se = 1.96 * s.std / std::sqrt(static_cast<double>(s.count));
  s.se_lo = s.mean - se;
  s.se_hi = s.mean + se;
  s.spread_lo = s.mean - 1.96 * s.std;
  s.spread_hi = s.mean + 1.96 * s.std;
  return s;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

struct PointSystem {
  KernelSpec spec;
  DenseOperator k;
  std::optional<LowRankShiftPreconditioner> pc;
};

KernelSpec kernel_at(const ExperimentConfig& c, double l) {
  KernelSpec s;
  s.family = c.kernel;
  s.f = c.f;
  s.l = l;
  s.mu = c.mu;
  return s;
}

LabeledData make_sweep_dataset(const ExperimentConfig& c) {
  RngStream rng(substream_seed(c.seed, kDatasetStream));
  if (c.dataset == "cube") return {generate_cube_dataset(c.n, c.d, c.side, rng), Vector()};
  if (c.dataset == "franke") return generate_franke_dataset(c.n, c.noise_sd, rng);
  return ingest_csv_dataset(c.csv_path, c.label_column, c.subsample_n, rng);
}

Vector uniform_labels(const ExperimentConfig& c, Eigen::Index n) {
  RngStream rng(substream_seed(c.seed, kLabelStream));
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = uniform01(rng) - 0.5;
  return y;
}

double kappa_for(const ExperimentConfig& c, const PointSystem& sys, bool precond, std::size_t li) {
  const Preconditioner* pc = precond ? &*sys.pc : nullptr;
  if (c.kappa_source == KappaSource::Dense) {
    if (!pc) return condition_number_dense(sys.k.matrix());
    const SplitPreconditionedOperator op(sys.k, *pc);
    const Eigen::Index n = sys.k.dim();
    Matrix dense(n, n);
    Vector col(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      op.apply(Vector::Unit(n, j), col);
      dense.col(j) = col;
    }
    return condition_number_dense(0.5 * (dense + dense.transpose()));
  }
  RngStream rng(point_seed(c.seed, kPilotStream, li));
  ConditionEstimateOptions o;
  o.pilot_steps = static_cast<int>(std::min<Eigen::Index>(c.pilot_steps, sys.k.dim()));
  o.precond = pc;
  // K_hat >= f^2 mu I, and K_hat >= M for the shifted pivoted-Cholesky M.
  o.lambda_min_floor = pc ? 1.0 : sys.spec.f * sys.spec.f * sys.spec.mu;
  return estimate_condition_number(sys.k, o, rng);
}

// [precond]-[truncation]-[i_orth], e.g. PC-TSS-n or NP-T-imin-2.
std::string method_label(const MethodSpec& m, const ReorthPolicy& r) {
  return m.to_string() + "-" + (r.is_full() ? std::string("n") : std::to_string(r.i_orth()));
}

PointSystem build_point(const ExperimentConfig& c, const Dataset& data, double l, bool need_pc) {
  PointSystem sys{kernel_at(c, l), gram_matrix(kernel_at(c, l), data), std::nullopt};
  if (need_pc && c.precond_rank > 0) {
    sys.pc.emplace(build_pivoted_cholesky(sys.k.matrix(), std::min(c.precond_rank, data.n()),
                                          sys.spec.f * sys.spec.f * sys.spec.mu));
  }
  return sys;
}

bool any_precond(const ExperimentConfig& c) {
  for (const auto& m : c.methods) {
    if (MethodSpec::parse(m).precond) return true;
  }
  return false;
}

void check_precond_available(const ExperimentConfig& c, const MethodSpec& m) {
  if (m.precond && c.precond_rank <= 0) throw Error("method " + m.to_string() + " needs precond_rank > 0");
}

// Quadratic-form sweep shared by quad-sweep and dist-compare: every sampled
// estimate is read off one cached Lanczos sequence per (l, method, dist).
ExperimentResult run_quad_family(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult res;
  res.config = c;
  const LabeledData ld = make_sweep_dataset(c);
  const Vector y = uniform_labels(c, ld.data.n());
  const bool need_pc = any_precond(c);
  for (std::size_t li = 0; li < c.l_grid.size(); ++li) {
    const double l = c.l_grid[li];
    std::optional<PointSystem> sys;
    double exact = std::numeric_limits<double>::quiet_NaN();
    std::string setup_error;
    try {
      sys.emplace(build_point(c, ld.data, l, need_pc));
      exact = dense_cholesky_oracle(sys->k.matrix(), y).quad_form;
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (const auto& mname : c.methods) {
      const MethodSpec m = MethodSpec::parse(mname);
      for (const auto& dspec : c.dists) {
        for (const auto& policy : c.reorth) {
          SweepPoint pt;
          pt.l = l;
          pt.quantity = "quad";
          pt.method = method_label(m, policy);
          pt.dist = dspec.to_string();
          pt.exact = exact;
          try {
            if (!setup_error.empty()) throw Error(setup_error);
            check_precond_available(c, m);
            const double kappa = dspec.needs_kappa() ? kappa_for(c, *sys, m.precond, li) : 0.0;
            pt.kappa = kappa;
            const TruncationDistribution dist = dspec.realize(c.i_min, c.i_max, std::max(kappa, 1.0));
            KrylovSettings ks;
            ks.precond = m.precond ? &*sys->pc : nullptr;
            ks.reorth = policy;
            ks.rtol = c.rtol;
            if (m.exact) throw Error("exact is not a sampling method for this experiment");
            if (m.tss) {
              const std::vector<double> seq = lanczos_quad_form_sequence(sys->k, y, dist.i_max(), ks);
              std::vector<double> errs(static_cast<std::size_t>(c.replicates));
              for (int r = 0; r < c.replicates; ++r) {
                RngStream rng(point_seed(point_seed(c.seed, kReplicateStream, li), 0, static_cast<std::size_t>(r)));
                const int q = dist.sample(rng);
                errs[static_cast<std::size_t>(r)] = tss_scalar_from_sequence(seq, dist, q) - exact;
              }
              pt.error = summarize(errs);
              pt.expected_cost = dist.expected_q();
            } else {
              const int mm = m.resolve_m(dist);
              if (mm > sys->k.dim()) throw Error("truncation length exceeds n");
              const std::vector<double> seq = lanczos_quad_form_sequence(sys->k, y, mm, ks);
              pt.error = summarize({seq.back() - exact});
              pt.expected_cost = mm;
            }
          } catch (const std::exception& e) {
            pt.error = summarize({});
            pt.failures = c.replicates;
            pt.reason = e.what();
          }
          res.points.push_back(std::move(pt));
        }
      }
    }
  }
  return res;
}

}  // namespace

ExperimentResult run_quad_sweep(const ExperimentConfig& c) { return run_quad_family(c); }
ExperimentResult run_dist_compare(const ExperimentConfig& c) { return run_quad_family(c); }

ExperimentResult run_reorth_variance(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult res;
  res.config = c;
  const LabeledData ld = make_sweep_dataset(c);
  const Vector y = uniform_labels(c, ld.data.n());
  const bool need_pc = any_precond(c);
  const std::vector<std::string> quantities = c.quantities.empty() ? std::vector<std::string>{"quad"} : c.quantities;
  for (std::size_t li = 0; li < c.l_grid.size(); ++li) {
    const double l = c.l_grid[li];
    std::optional<PointSystem> sys;
    std::string setup_error;
    double exact_quad = std::numeric_limits<double>::quiet_NaN();
    double exact_logdet = exact_quad;
    double exact_logqf = exact_quad;
    try {
      sys.emplace(build_point(c, ld.data, l, need_pc));
      const DenseOracleResult o = dense_cholesky_oracle(sys->k.matrix(), y);
      exact_quad = o.quad_form;
      exact_logdet = o.logdet;
      if (std::find(quantities.begin(), quantities.end(), "logqf") != quantities.end()) {
        RngStream zrng(point_seed(c.seed, kLabelStream, li));
        const Vector z = standard_normal_vector(sys->k.dim(), zrng);
        Eigen::SelfAdjointEigenSolver<Matrix> es(sys->k.matrix());
        const Vector proj = es.eigenvectors().transpose() * z;
        exact_logqf = proj.cwiseAbs2().dot(es.eigenvalues().array().log().matrix());
      }
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (const auto& quantity : quantities) {
      for (const auto& mname : c.methods) {
        const MethodSpec m = MethodSpec::parse(mname);
        for (const auto& dspec : c.dists) {
          for (const auto& policy : c.reorth) {
            SweepPoint pt;
            pt.l = l;
            pt.quantity = quantity;
            pt.method = method_label(m, policy);
            pt.dist = dspec.to_string();
            pt.exact = quantity == "quad" ? exact_quad : quantity == "logqf" ? exact_logqf : exact_logdet;
            try {
              if (!setup_error.empty()) throw Error(setup_error);
              check_precond_available(c, m);
              if (m.exact) throw Error("exact is not a sampling method for this experiment");
              const double kappa = dspec.needs_kappa() ? kappa_for(c, *sys, m.precond, li) : 0.0;
              pt.kappa = kappa;
              const TruncationDistribution dist = dspec.realize(c.i_min, c.i_max, std::max(kappa, 1.0));
              KrylovSettings ks;
              ks.precond = m.precond ? &*sys->pc : nullptr;
              ks.reorth = policy;
              ks.rtol = c.rtol;
              const double logm = ks.precond ? ks.precond->logdet() : 0.0;
              pt.expected_cost = m.tss ? dist.expected_q() : m.resolve_m(dist);
              std::vector<double> errs(static_cast<std::size_t>(c.replicates));
              std::vector<std::string> fails(static_cast<std::size_t>(c.replicates));
              std::vector<char> ok(static_cast<std::size_t>(c.replicates), 0);
              const int mm = m.tss ? 0 : m.resolve_m(dist);
              const int steps = std::max(dist.i_max(), mm);
              std::vector<double> quad_seq;
              if (quantity == "quad") quad_seq = lanczos_quad_form_sequence(sys->k, y, steps, ks);
              // logqf: one fixed probe, so only the truncation variable is random.
              Vector z_fixed;
              std::vector<double> log_seq;
              if (quantity == "logqf") {
                RngStream zrng(point_seed(c.seed, kLabelStream, li));
                z_fixed = standard_normal_vector(sys->k.dim(), zrng);
                if (m.precond) throw Error("logqf is defined for unpreconditioned methods only");
                log_seq = lanczos_log_sequence(sys->k, z_fixed, steps, ks);
              }
              parallel_for(c.replicates, c.threads, [&](int r) {
                const auto ri = static_cast<std::size_t>(r);
                try {
                  // Same stream per replicate for every policy: common random numbers.
                  RngStream rng(point_seed(point_seed(c.seed, kReplicateStream, li), 1, ri));
                  double est = 0.0;
                  if (quantity == "quad") {
                    est = m.tss ? tss_scalar_from_sequence(quad_seq, dist, dist.sample(rng))
                                : quad_seq[static_cast<std::size_t>(mm - 1)];
                  } else if (quantity == "logqf") {
                    const double s_z = m.tss ? tss_scalar_from_sequence(log_seq, dist, dist.sample(rng))
                                             : log_seq[static_cast<std::size_t>(mm - 1)];
                    est = z_fixed.squaredNorm() * s_z;
                  } else {
                    const Vector z = standard_normal_vector(sys->k.dim(), rng);
                    if (m.tss) {
                      est = z.squaredNorm() * tss_logqf(sys->k, z, dist, rng, ks).estimate + logm;
                    } else {
                      est = z.squaredNorm() * lanczos_log_sequence(sys->k, z, mm, ks).back() + logm;
                    }
                  }
                  errs[ri] = est - pt.exact;
                  ok[ri] = 1;
                } catch (const std::exception& e) {
                  fails[ri] = e.what();
                }
              });
              std::vector<double> good;
              for (std::size_t r = 0; r < errs.size(); ++r) {
                if (ok[r]) {
                  good.push_back(errs[r]);
                } else {
                  ++pt.failures;
                  if (pt.reason.empty()) pt.reason = "replicate " + std::to_string(r) + ": " + fails[r];
                }
              }
              pt.error = summarize(good);
            } catch (const std::exception& e) {
              pt.error = summarize({});
              pt.failures = c.replicates;
              pt.reason = e.what();
            }
            res.points.push_back(std::move(pt));
          }
        }
      }
    }
  }
  return res;
}

ExperimentResult run_nlml_sweep(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult res;
  res.config = c;
  const LabeledData ld = make_sweep_dataset(c);
  const Eigen::Index n = ld.data.n();
  const double per_n = 1.0 / static_cast<double>(n);
  static const char* kNames[4] = {"nlml", "grad_f", "grad_l", "grad_mu"};
  for (std::size_t li = 0; li < c.l_grid.size(); ++li) {
    const double l = c.l_grid[li];
    const KernelSpec spec = kernel_at(c, l);
    std::optional<GpModel> model;
    std::optional<GpSystem> np_sys;
    std::optional<GpSystem> pc_sys;
    std::array<double, 4> exact{};
    exact.fill(std::numeric_limits<double>::quiet_NaN());
    std::string setup_error;
    try {
      RngStream lrng(point_seed(c.seed, kLabelStream, li));
      Vector labels = sample_labels_from_prior(spec, ld.data, lrng);
      model.emplace(ld.data, std::move(labels), spec);
      const NlmlExact ex = nlml_exact_with_grad(*model);
      exact = {ex.value, ex.grad.grads[0], ex.grad.grads[1], ex.grad.grads[2]};
      np_sys.emplace(build_gp_system(*model, 0));
      if (any_precond(c)) pc_sys.emplace(build_gp_system(*model, c.precond_rank));
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (const auto& mname : c.methods) {
      const MethodSpec m = MethodSpec::parse(mname);
      for (const auto& dspec : c.dists) {
        for (const auto& policy : c.reorth) {
          std::array<SweepPoint, 4> pts;
          for (std::size_t q = 0; q < 4; ++q) {
            pts[q].l = l;
            pts[q].quantity = kNames[q];
            pts[q].method = method_label(m, policy);
            pts[q].dist = dspec.to_string();
            pts[q].exact = exact[q];
            pts[q].scale = per_n;
          }
          try {
            if (!setup_error.empty()) throw Error(setup_error);
            check_precond_available(c, m);
            if (m.exact) throw Error("exact is not a sampling method for this experiment");
            const GpSystem& sys = m.precond ? *pc_sys : *np_sys;
            double kappa = 0.0;
            if (dspec.needs_kappa()) {
              const PointSystem ps{spec, sys.k, sys.precond};
              kappa = kappa_for(c, ps, m.precond, li);
            }
            const TruncationDistribution dist = dspec.realize(c.i_min, c.i_max, std::max(kappa, 1.0));
            EstimatorConfig ec;
            if (m.tss) {
              ec.solver = Tss{dist};
            } else {
              ec.solver = Truncated{m.resolve_m(dist)};
            }
            ec.k_z = c.k_z;
            ec.reorth = policy;
            ec.rtol = c.rtol;
            const auto reps = static_cast<std::size_t>(c.replicates);
            std::vector<std::array<double, 4>> errs(reps);
            std::vector<std::string> fails(reps);
            std::vector<char> ok(reps, 0);
            parallel_for(c.replicates, c.threads, [&](int r) {
              const auto ri = static_cast<std::size_t>(r);
              try {
                RngStream rng(point_seed(point_seed(c.seed, kReplicateStream, li), 2, ri));
                const NlmlEstimate e = nlml_estimate_full(*model, sys, ec, rng, true, true);
                errs[ri] = {e.value - exact[0], e.grad.grads[0] - exact[1], e.grad.grads[1] - exact[2],
                            e.grad.grads[2] - exact[3]};
                ok[ri] = 1;
              } catch (const std::exception& e) {
                fails[ri] = e.what();
              }
            });
            for (std::size_t q = 0; q < 4; ++q) {
              std::vector<double> good;
              for (std::size_t r = 0; r < reps; ++r) {
                if (ok[r]) {
                  good.push_back(errs[r][q]);
                } else {
                  ++pts[q].failures;
                  if (pts[q].reason.empty()) pts[q].reason = "replicate " + std::to_string(r) + ": " + fails[r];
                }
              }
              pts[q].error = summarize(good);
              pts[q].kappa = kappa;
              pts[q].expected_cost = m.tss ? dist.expected_q() : m.resolve_m(dist);
            }
          } catch (const std::exception& e) {
            for (auto& p : pts) {
              p.error = summarize({});
              p.failures = c.replicates;
              p.reason = e.what();
            }
          }
          for (auto& p : pts) res.points.push_back(std::move(p));
        }
      }
    }
  }
  return res;
}

ExperimentResult run_training(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult res;
  res.config = c;
  RngStream drng(substream_seed(c.seed, kDatasetStream));
  KernelSpec base;
  base.family = c.kernel;
  LabeledData ld;
  if (c.dataset == "cube") {
    ld.data = generate_cube_dataset(c.n, c.d, c.side, drng);
    KernelSpec truth = base;
    truth.f = c.true_f;
    truth.l = c.true_l;
    truth.mu = c.true_mu;
    RngStream lrng(substream_seed(c.seed, kLabelStream));
    ld.labels = sample_labels_from_prior(truth, ld.data, lrng);
  } else if (c.dataset == "franke") {
    ld = generate_franke_dataset(c.n, c.noise_sd, drng);
  } else {
    ld = ingest_csv_dataset(c.csv_path, c.label_column, c.subsample_n, drng);
  }
  if (c.i_max > ld.data.n()) throw Error("i_max exceeds the dataset size");

  UnconstrainedParams init;
  init.active = c.active;
  for (std::size_t i = 0; i < 3; ++i) init.tilde[i] = c.init_unconstrained ? c.init[i] : softplus_inv(c.init[i]);
  base = init.apply_to(base);
  const GpModel model(ld.data, ld.labels, base);

  OptimizerConfig oc;
  oc.kind = c.optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::Gd;
  oc.lr = c.lr;
  oc.iterations = c.iterations;
  oc.normalize = c.normalize_loss;

  for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
    const MethodSpec m = MethodSpec::parse(c.methods[mi]);
    for (const auto& dspec : c.dists) {
      TrainRun run;
      run.method = m.exact ? std::string("exact") : m.to_string();
      if (!m.exact && c.dists.size() > 1) run.method += "[" + dspec.to_string() + "]";
      RngStream rng(point_seed(c.seed, kTrainStream, mi));
      try {
        if (m.exact) {
          run.trajectory = train(model, init, oc, nullptr, rng);
        } else {
          check_precond_available(c, m);
          if (dspec.needs_kappa()) throw Error("condition-dependent distributions are not supported in training");
          const TruncationDistribution dist = dspec.realize(c.i_min, c.i_max, 1.0);
          EstimatorConfig ec;
          if (m.tss) {
            ec.solver = Tss{dist};
          } else {
            ec.solver = Truncated{m.resolve_m(dist)};
          }
          ec.k_z = c.k_z;
          ec.precond_rank = m.precond ? c.precond_rank : 0;
          ec.reorth = c.reorth.front();
          ec.rtol = c.rtol;
          run.trajectory = train(model, init, oc, &ec, rng);
        }
      } catch (const std::exception& e) {
        run.trajectory.failed = true;
        run.trajectory.failure = e.what();
      }
      res.runs.push_back(std::move(run));
      if (m.exact) break;
    }
  }
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::QuadSweep: return run_quad_sweep(c);
    case Experiment::DistCompare: return run_dist_compare(c);
    case Experiment::ReorthVariance: return run_reorth_variance(c);
    case Experiment::NlmlSweep: return run_nlml_sweep(c);
    case Experiment::Train2d:
    case Experiment::Train3d: return run_training(c);
  }
  throw Error("unknown experiment");
}

std::vector<OracleRow> run_oracle(const ExperimentConfig& c) {
  c.validate();
  const LabeledData ld = make_sweep_dataset(c);
  const Vector y = uniform_labels(c, ld.data.n());
  std::vector<OracleRow> out;
  for (std::size_t li = 0; li < c.l_grid.size(); ++li) {
    OracleRow row;
    row.l = c.l_grid[li];
    const PointSystem sys = build_point(c, ld.data, row.l, true);
    const DenseOracleResult o = dense_cholesky_oracle(sys.k.matrix(), y);
    row.quad_form = o.quad_form;
    row.logdet = o.logdet;
    ExperimentConfig dense_cfg = c;
    dense_cfg.kappa_source = KappaSource::Dense;
    row.kappa = kappa_for(dense_cfg, sys, false, li);
    row.kappa_precond = sys.pc ? kappa_for(dense_cfg, sys, true, li) : row.kappa;
    RngStream lrng(point_seed(c.seed, kLabelStream, li));
    const GpModel model(ld.data, sample_labels_from_prior(sys.spec, ld.data, lrng), sys.spec);
    const NlmlExact ex = nlml_exact_with_grad(model);
    row.nlml = ex.value;
    row.grad = ex.grad;
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

CsvTable to_table(const ExperimentResult& r) {
  CsvTable t;
  if (r.config.experiment == Experiment::Train2d || r.config.experiment == Experiment::Train3d) {
    t.columns = {"method", "step", "f", "l", "mu", "loss", "status", "reason"};
    for (const auto& run : r.runs) {
      for (const auto& rec : run.trajectory.records) {
        t.rows.push_back({run.method, std::to_string(rec.step), format_double(rec.f), format_double(rec.l),
                          format_double(rec.mu), format_double(rec.loss), "ok", ""});
      }
      if (run.trajectory.failed) {
        t.rows.push_back({run.method, "", "", "", "", "", "failed", run.trajectory.failure});
      }
    }
    return t;
  }
  t.columns = {"l",         "quantity",   "method",      "dist",       "expected_cost", "exact",
               "kappa",     "mean_error", "std",         "se_lo",      "se_hi",         "spread_lo",
               "spread_hi", "scale",      "mean_error_scaled", "std_scaled", "se_lo_scaled", "se_hi_scaled",
               "spread_lo_scaled", "spread_hi_scaled", "replicates", "failures", "status", "reason"};
  for (const auto& p : r.points) {
    const auto& e = p.error;
    const std::string status = p.failures == 0 ? "ok" : (e.count > 0 ? "partial" : "failed");
    std::string reason = p.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    t.rows.push_back({format_double(p.l), p.quantity, p.method, p.dist, format_double(p.expected_cost),
                      format_double(p.exact), format_double(p.kappa), format_double(e.mean), format_double(e.std),
                      format_double(e.se_lo), format_double(e.se_hi), format_double(e.spread_lo),
                      format_double(e.spread_hi), format_double(p.scale), format_double(e.mean * p.scale),
                      format_double(e.std * p.scale), format_double(e.se_lo * p.scale),
                      format_double(e.se_hi * p.scale), format_double(e.spread_lo * p.scale),
                      format_double(e.spread_hi * p.scale), std::to_string(e.count + p.failures),
                      std::to_string(p.failures), status, reason});
  }
  return t;
}

CsvTable to_table(const std::vector<OracleRow>& rows) {
  CsvTable t;
  t.columns = {"l", "quad_form", "logdet", "kappa", "kappa_precond", "nlml", "grad_f", "grad_l", "grad_mu"};
  for (const auto& r : rows) {
    t.rows.push_back({format_double(r.l), format_double(r.quad_form), format_double(r.logdet),
                      format_double(r.kappa), format_double(r.kappa_precond), format_double(r.nlml),
                      format_double(r.grad[Hyper::F]), format_double(r.grad[Hyper::L]),
                      format_double(r.grad[Hyper::Mu])});
  }
  return t;
}

void write_csv(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& echo, const CsvTable& t) {
  for (const auto& [k, v] : echo) os << "# " << k << '=' << v << '\n';
  os << join(t.columns, ',') << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
}

std::string render_csv(const std::vector<std::pair<std::string, std::string>>& echo, const CsvTable& table) {
  std::ostringstream os;
  write_csv(os, echo, table);
  return os.str();
}

CsvTable parse_csv_table(const std::string& text) {
  CsvTable t;
  std::stringstream ss(text);
  std::string line;
  bool header = false;
  while (std::getline(ss, line)) {
    if (line.rfind("# ", 0) == 0) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (!header) {
      t.columns = std::move(cells);
      header = true;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace ptss
