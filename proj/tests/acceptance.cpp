// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: ptss_acceptance <path-to-ptss-cli> [criterion numbers...]

#include "ptss/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace ptss;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Matrix kernel_matrix(Eigen::Index n, RngStream& rng, KernelFamily fam = KernelFamily::Rbf) {
  const Dataset d = generate_cube_dataset(n, 3, 4.0, rng);
  KernelSpec s;
  s.family = fam;
  s.l = 0.5 + 2.5 * uniform01(rng);
  s.mu = 0.01 + 0.2 * uniform01(rng);
  return gram_matrix(s, d).matrix();
}

TruncationDistribution random_distribution(int i_min, int i_max, RngStream& rng) {
  const double u = uniform01(rng);
  if (u < 0.3) return make_exponential(0.1 + 1.5 * uniform01(rng), i_min, i_max);
  if (u < 0.5) return make_geometric(i_min, i_max);
  std::vector<double> w;
  for (int j = i_min; j <= i_max; ++j) w.push_back(0.05 + uniform01(rng));
  return TruncationDistribution(i_min, w);
}

CgTrace cg(const Matrix& a, const Vector& y, int iters) {
  CgOptions o;
  o.max_iters = iters;
  return cg_run(DenseOperator(a), y, o);
}

// ---------------------------------------------------------------------------

Outcome mean_identity() {
  RngStream rng(101);
  double worst_solve = 0.0, worst_log = 0.0;
  for (int sys = 0; sys < 20; ++sys) {
    const Matrix a = kernel_matrix(64, rng);
    const Vector y = standard_normal_vector(64, rng);
    const int i_min = 1 + static_cast<int>(6 * uniform01(rng));
    const int i_max = i_min + static_cast<int>(12 * uniform01(rng));
    const auto dist = random_distribution(i_min, i_max, rng);
    const CgTrace tr = cg(a, y, i_max);
    Vector mean = Vector::Zero(64);
    for (int q = i_min; q <= i_max; ++q) mean += dist.prob(q) * tss_solve_from_trace(tr, dist, q);
    worst_solve = std::max(worst_solve, (mean - tr.iterate(i_max)).norm() / tr.iterate(i_max).norm());
    const auto s = lanczos_log_sequence(DenseOperator(a), y, i_max);
    double ms = 0.0;
    for (int q = i_min; q <= i_max; ++q) ms += dist.prob(q) * tss_scalar_from_sequence(s, dist, q);
    worst_log = std::max(worst_log, rel(ms, s.back()));
  }
  return {worst_solve <= 1e-10 && worst_log <= 1e-10,
          fmt("max rel err solve %.2e, logqf %.2e (tol 1e-10)", worst_solve, worst_log)};
}

Outcome variance_identity() {
  RngStream rng(202);
  double worst = 0.0;
  for (int sys = 0; sys < 20; ++sys) {
    const Matrix a = kernel_matrix(64, rng);
    const Vector y = standard_normal_vector(64, rng);
    const int i_min = 1 + static_cast<int>(6 * uniform01(rng));
    const int i_max = i_min + static_cast<int>(12 * uniform01(rng));
    const auto dist = random_distribution(i_min, i_max, rng);
    const CgTrace tr = cg(a, y, i_max);
    const VectorMoments m = tss_exact_moments(padded_increments(tr, i_max), dist);
    double var = 0.0;
    for (int q = i_min; q <= i_max; ++q) var += dist.prob(q) * (tss_solve_from_trace(tr, dist, q) - m.mean).squaredNorm();
    if (var > 0.0) worst = std::max(worst, rel(var, m.variance));
  }
  // Scalar Monte Carlo on a log-quadrature sequence.
  const Matrix a = kernel_matrix(64, rng);
  const Vector z = standard_normal_vector(64, rng);
  const auto dist = make_exponential(0.5, 3, 12);
  const auto s = lanczos_log_sequence(DenseOperator(a), z, 12);
  std::vector<double> deltas(12);
  for (int j = 0; j < 12; ++j) deltas[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)] - (j ? s[static_cast<std::size_t>(j - 1)] : 0.0);
  const ScalarMoments sm = tss_exact_moments(deltas, dist);
  RngStream draw(303);
  const int reps = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double v = tss_scalar_from_sequence(s, dist, dist.sample(draw));
    sum += v;
    sum2 += v * v;
  }
  const double mc_mean = sum / reps;
  const double mc_var = (sum2 - reps * mc_mean * mc_mean) / (reps - 1);
  const double mc_rel = rel(mc_var, sm.variance);
  return {worst <= 1e-10 && mc_rel <= 0.05,
          fmt("enumerated vs formula %.2e (tol 1e-10); 1e6-draw MC variance off by %.2f%% (tol 5%%)", worst,
              100.0 * mc_rel)};
}

Outcome variance_bounds() {
  RngStream rng(404);
  int violations = 0, checked = 0;
  double tightest = 0.0;
  for (int c = 0; c < 50; ++c) {
    const Eigen::Index n = 24 + static_cast<Eigen::Index>(40 * uniform01(rng));
    const Matrix a = kernel_matrix(n, rng, uniform01(rng) < 0.5 ? KernelFamily::Rbf : KernelFamily::Matern32);
    const Vector y = standard_normal_vector(n, rng);
    const double kappa = condition_number_dense(a);
    const int i_min = 2 + static_cast<int>(5 * uniform01(rng));
    const int i_max = std::min<int>(static_cast<int>(n), i_min + static_cast<int>(10 * uniform01(rng)));
    const auto dist = random_distribution(i_min, i_max, rng);

    const CgTrace tr = cg(a, y, i_max);
    const double var_solve = tss_exact_moments(padded_increments(tr, i_max), dist).variance;
    const double xn = a.ldlt().solve(y).squaredNorm();
    const double b_solve = variance_bound(Flavor::Solve, kappa, xn, gamma_factor(dist, Flavor::Solve, kappa)).bound;

    const auto s = lanczos_log_sequence(DenseOperator(a), y, i_max);
    std::vector<double> deltas(static_cast<std::size_t>(i_max));
    for (int j = 0; j < i_max; ++j) {
      deltas[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)] - (j ? s[static_cast<std::size_t>(j - 1)] : 0.0);
    }
    const double var_log = tss_exact_moments(deltas, dist).variance;
    const double b_log = variance_bound(Flavor::LogQF, kappa, 0.0, gamma_factor(dist, Flavor::LogQF, kappa)).bound;

    violations += (var_solve > b_solve) + (var_log > b_log);
    checked += 2;
    tightest = std::max({tightest, var_solve / b_solve, var_log / b_log});
  }
  return {violations == 0, fmt("%d violations over %d checks; max variance/bound %.2e", violations, checked, tightest)};
}

/// Minimum of sum t^i / p_i over the simplex by a zooming grid search.
double simplex_grid_min(double t, int m1, int m2) {
  const int k = m2 - m1 + 1;
  const auto f = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += std::pow(t, m1 + i) / p[static_cast<std::size_t>(i)];
    return s;
  };
  if (k == 1) return std::pow(t, m1);
  std::vector<double> centre(static_cast<std::size_t>(k - 1), 1.0 / k);
  double width = 1.0;
  double best = std::numeric_limits<double>::infinity();
  const int g = 24;
  for (int level = 0; level < 40; ++level) {
    std::vector<double> best_p = centre;
    std::vector<int> idx(static_cast<std::size_t>(k - 1), 0);
    while (true) {
      std::vector<double> p(static_cast<std::size_t>(k));
      double rest = 1.0;
      bool ok = true;
      for (int i = 0; i < k - 1; ++i) {
        const double v = centre[static_cast<std::size_t>(i)] + width * (idx[static_cast<std::size_t>(i)] / double(g) - 0.5);
        ok = ok && v > 0.0;
        p[static_cast<std::size_t>(i)] = v;
        rest -= v;
      }
      p[static_cast<std::size_t>(k - 1)] = rest;
      if (ok && rest > 0.0) {
        const double v = f(p);
        if (v < best) {
          best = v;
          best_p.assign(p.begin(), p.end() - 1);
        }
      }
      int d = 0;
      while (d < k - 1 && ++idx[static_cast<std::size_t>(d)] > g) idx[static_cast<std::size_t>(d++)] = 0;
      if (d == k - 1) break;
    }
    centre = best_p;
    width *= 0.5;
  }
  return best;
}

Outcome gamma_optimality() {
  RngStream rng(505);
  int beaten = 0;
  double worst_closed = 0.0;
  for (int c = 0; c < 100; ++c) {
    const Flavor fl = c % 2 ? Flavor::LogQF : Flavor::Solve;
    const double kappa = std::pow(10.0, 4.0 * uniform01(rng)) + 1e-3;
    const int i_min = 1 + static_cast<int>(8 * uniform01(rng));
    const int i_max = i_min + static_cast<int>(12 * uniform01(rng));
    const double g = gamma_factor(make_gamma_optimal(fl, kappa, i_min, i_max), fl, kappa).value;
    worst_closed = std::max(worst_closed, rel(g, gamma_min_closed_form(fl, kappa, i_min, i_max)));
    for (int r = 0; r < 100; ++r) {
      if (gamma_factor(random_distribution(i_min, i_max, rng), fl, kappa).value < g * (1.0 - 1e-12)) ++beaten;
    }
  }
  double worst_grid = 0.0;
  for (double t : {0.05, 0.3, 0.8, 1.0, 1.7, 4.0}) {
    for (int k = 1; k <= 4; ++k) {
      for (int m1 : {1, 3}) {
        const double closed = minimize_weighted_sum(t, m1, m1 + k - 1).minimum;
        worst_grid = std::max(worst_grid, rel(closed, simplex_grid_min(t, m1, m1 + k - 1)));
      }
    }
  }
  return {beaten == 0 && worst_closed <= 1e-10 && worst_grid <= 1e-6,
          fmt("%d of 10000 random distributions beat the optimum; closed form %.2e (tol 1e-10); grid %.2e (tol 1e-6)",
              beaten, worst_closed, worst_grid)};
}

Outcome cg_lanczos_equivalence() {
  RngStream rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix g(32, 32);
    for (Eigen::Index i = 0; i < 32; ++i) {
      for (Eigen::Index j = 0; j < 32; ++j) g(i, j) = standard_normal(rng);
    }
    const Matrix q = g.householderQr().householderQ();
    const double kappa = std::pow(10.0, 3.0 * uniform01(rng));
    Vector ev(32);
    for (int i = 0; i < 32; ++i) ev[i] = 1.0 + (kappa - 1.0) * uniform01(rng);
    ev[0] = 1.0;
    ev[31] = kappa;
    const Matrix a = q * ev.asDiagonal() * q.transpose();
    const Vector y = standard_normal_vector(32, rng);
    const SymTridiagonal tc = cg_to_tridiagonal(cg(a, y, 10), 10);
    LanczosOptions lo;
    lo.steps = 10;
    const SymTridiagonal tl = lanczos_run(DenseOperator(a), y.normalized(), lo).tridiagonal(10);
    worst = std::max({worst, (tc.diag - tl.diag).cwiseAbs().maxCoeff(), (tc.offdiag - tl.offdiag).cwiseAbs().maxCoeff()});
  }
  return {worst <= 1e-8, fmt("max entrywise difference %.2e over 10 systems (tol 1e-8)", worst)};
}

Outcome slq_logdet_accuracy() {
  RngStream rng(707);
  const Dataset d = generate_cube_dataset(256, 3, 6.3496042078727978, rng);
  const KernelSpec spec{KernelFamily::Rbf, 1.0, 2.0, 0.1};
  const DenseOperator k = gram_matrix(spec, d);
  const double exact = dense_cholesky_oracle(k.matrix(), Vector::Ones(256)).logdet;
  RngStream probes(708);
  const double est = slq_logdet(k, 50, Truncated{50}, probes);
  const double err = rel(est, exact);

  const auto m = build_pivoted_cholesky(k.matrix(), 32, spec.f * spec.f * spec.mu);
  const Matrix isqrt = Eigen::SelfAdjointEigenSolver<Matrix>(m.dense()).operatorInverseSqrt();
  const Matrix split = isqrt * k.matrix() * isqrt;
  const double split_sum = m.logdet() + dense_cholesky_oracle(split, Vector::Ones(256)).logdet;
  const double split_err = rel(split_sum, exact);
  return {err <= 0.05 && split_err <= 1e-8,
          fmt("SLQ %.4f vs dense %.4f (rel %.2f%%, tol 5%%); split identity rel %.2e (tol 1e-8)", est, exact,
              100.0 * err, split_err)};
}

Outcome nlml_gradient_oracle() {
  RngStream rng(808);
  double worst = 0.0;
  for (KernelFamily fam : {KernelFamily::Rbf, KernelFamily::Matern32}) {
    Dataset d = generate_cube_dataset(64, 3, 4.0, rng);
    Vector y = standard_normal_vector(64, rng);
    const GpModel m(std::move(d), std::move(y), KernelSpec{fam, 1.2, 1.1, 0.1});
    const NlmlGradient g = nlml_grad_exact(m);
    for (Hyper h : kAllHypers) {
      const double eps = 1e-5 * m.spec.get(h);
      GpModel up = m, dn = m;
      up.spec.set(h, m.spec.get(h) + eps);
      dn.spec.set(h, m.spec.get(h) - eps);
      const double fd = (nlml_exact(up).value - nlml_exact(dn).value) / (2.0 * eps);
      worst = std::max(worst, rel(g[h], fd));
    }
  }
  return {worst <= 1e-5, fmt("max rel difference to central differences %.2e (tol 1e-5)", worst)};
}

const SweepPoint* find_point(const ExperimentResult& r, double l, const std::string& method, const std::string& dist,
                             const std::string& quantity = "quad") {
  for (const auto& p : r.points) {
    if (p.l == l && p.method == method && p.dist == dist && p.quantity == quantity) return &p;
  }
  return nullptr;
}

Outcome quad_sweep_behaviour() {
  ExperimentConfig c = default_config(Experiment::QuadSweep);
  c.seed = 1;
  const ExperimentResult r = run_experiment(c);
  const std::string dist = c.dists.front().to_string();
  int negative = 0, better = 0, failures = 0;
  for (double l : c.l_grid) {
    const auto* imin = find_point(r, l, "PC-T-imin-n", dist);
    const auto* ceil = find_point(r, l, "PC-T-ceil-n", dist);
    const auto* tss = find_point(r, l, "PC-TSS-n", dist);
    if (!imin || !ceil || !tss || imin->failures || ceil->failures || tss->failures) {
      ++failures;
      continue;
    }
    negative += imin->error.mean < 0.0;
    better += std::abs(tss->error.mean) <= std::abs(ceil->error.mean);
  }
  const int pts = static_cast<int>(c.l_grid.size());
  return {failures == 0 && negative == pts && better >= (4 * pts + 4) / 5,
          fmt("truncated-at-i_min negative at %d/%d points; |TSS| <= |ceil| at %d/%d (need 80%%); %d failed points",
              negative, pts, better, pts, failures)};
}

Outcome dist_compare_behaviour() {
  ExperimentConfig c = default_config(Experiment::DistCompare);
  c.seed = 1;
  const ExperimentResult r = run_experiment(c);
  int pc_worse = 0, failures = 0;
  double pc_spread = 0.0, np_spread = 0.0;
  for (double l : c.l_grid) {
    double pc_lo = std::numeric_limits<double>::infinity(), pc_hi = 0.0;
    double np_lo = std::numeric_limits<double>::infinity(), np_hi = 0.0;
    for (const auto& ds : c.dists) {
      const auto* pc = find_point(r, l, "PC-TSS-n", ds.to_string());
      const auto* np = find_point(r, l, "NP-TSS-n", ds.to_string());
      if (!pc || !np || pc->failures || np->failures) {
        ++failures;
        continue;
      }
      pc_worse += pc->error.std > np->error.std;
      // Guard against curves that sit at round-off.
      const double floor = 1e-9 * std::abs(pc->exact);
      pc_lo = std::min(pc_lo, pc->error.std + floor);
      pc_hi = std::max(pc_hi, pc->error.std + floor);
      np_lo = std::min(np_lo, np->error.std + floor);
      np_hi = std::max(np_hi, np->error.std + floor);
    }
    pc_spread = std::max(pc_spread, pc_hi / pc_lo);
    np_spread = std::max(np_spread, np_hi / np_lo);
  }
  return {failures == 0 && pc_worse == 0 && pc_spread <= 2.0 && np_spread > 2.0,
          fmt("preconditioned std above unpreconditioned at %d points; max spread across distributions: "
              "preconditioned %.2fx (need <= 2), unpreconditioned %.2fx (need > 2)",
              pc_worse, pc_spread, np_spread)};
}

Outcome reorth_behaviour() {
  ExperimentConfig c = default_config(Experiment::ReorthVariance);
  c.seed = 1;
  c.reorth = {ReorthPolicy::window(2), ReorthPolicy::full()};
  const ExperimentResult r = run_experiment(c);
  const std::string dist = c.dists.front().to_string();
  int bad = 0, failures = 0;
  std::string ratios;
  for (const std::string q : {"quad", "logqf"}) {
    for (double l : c.l_grid) {
      const auto* w2 = find_point(r, l, "NP-TSS-2", dist, q);
      const auto* full = find_point(r, l, "NP-TSS-n", dist, q);
      if (!w2 || !full || full->failures) {
        ++failures;
        continue;
      }
      // A window-2 run that cannot complete has unbounded spread.
      if (w2->failures == c.replicates) continue;
      bad += full->error.std > w2->error.std;
      ratios += fmt(" %s@%g=%.1e", q.c_str(), l, full->error.std / w2->error.std);
    }
  }
  return {failures == 0 && bad == 0,
          fmt("full std above window-2 std at %d points; full/window-2 ratios:%s", bad, ratios.c_str())};
}

Outcome training_behaviour() {
  std::vector<double> tss_dist, imin_dist;
  int imin_closer = 0, failures = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig c = default_config(Experiment::Train2d);
    c.seed = seed;
    c.methods = {"exact", "NP-TSS", "NP-T-imin"};
    const ExperimentResult r = run_experiment(c);
    std::map<std::string, TrajectoryRecord> end;
    for (const auto& run : r.runs) {
      if (run.trajectory.failed || run.trajectory.records.empty()) {
        ++failures;
        continue;
      }
      end[run.method] = run.trajectory.records.back();
    }
    if (end.size() != 3) continue;
    const auto dist_to_exact = [&](const TrajectoryRecord& e) {
      return std::hypot(e.l - end["exact"].l, e.mu - end["exact"].mu);
    };
    tss_dist.push_back(dist_to_exact(end["NP-TSS"]));
    imin_dist.push_back(dist_to_exact(end["NP-T-imin"]));
    imin_closer += imin_dist.back() <= tss_dist.back();
  }
  if (tss_dist.size() != 3) return {false, fmt("%d training runs failed", failures)};
  std::vector<double> sorted = tss_dist;
  std::sort(sorted.begin(), sorted.end());
  return {sorted[1] <= 0.25 && imin_closer == 0,
          fmt("TSS endpoint distance %.3f/%.3f/%.3f (median %.3f, tol 0.25); truncated-at-i_min %.3f/%.3f/%.3f",
              tss_dist[0], tss_dist[1], tss_dist[2], sorted[1], imin_dist[0], imin_dist[1], imin_dist[2])};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ptss_acceptance";
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"quad-sweep", "--replicates 500"},
      {"dist-compare", "--replicates 500"},
      {"reorth-variance", "--replicates 50"},
      {"nlml-sweep", "--replicates 5 --l-grid 1,4"},
      {"train-2d", "--iterations 30"},
      {"train-3d", "--iterations 30"},
      {"oracle", "--experiment nlml-sweep --l-grid 1,4"},
  };
  int mismatched = 0, errors = 0;
  std::string bad;
  for (const auto& [sub, extra] : runs) {
    std::string outs[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / (sub + "_" + std::to_string(k) + ".csv");
      fs::remove(out);
      const std::string cmd = "\"" + cli + "\" " + sub + " --seed 11 " + extra + " --out \"" + out.string() + "\"";
      if (std::system(cmd.c_str()) != 0) {
        ++errors;
        bad += " " + sub + "(exit)";
        break;
      }
      outs[k] = slurp(out);
    }
    if (outs[0].empty() || outs[0] != outs[1]) {
      ++mismatched;
      bad += " " + sub;
    }
  }
  return {mismatched == 0 && errors == 0,
          fmt("%zu CLI experiments rerun; %d differ, %d errored%s", runs.size(), mismatched, errors, bad.c_str())};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <ptss-cli> [criterion ...]\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<Criterion> criteria = {
      {1, "TSS mean identity", 10, mean_identity},
      {2, "TSS variance identity", 60, variance_identity},
      {3, "variance bounds hold", 60, variance_bounds},
      {4, "Gamma-optimal distribution", 30, gamma_optimality},
      {5, "CG to Lanczos tridiagonal", 5, cg_lanczos_equivalence},
      {6, "SLQ log-determinant", 60, slq_logdet_accuracy},
      {7, "NLML gradient oracle", 10, nlml_gradient_oracle},
      {8, "quad-sweep underestimation", 300, quad_sweep_behaviour},
      {9, "dist-compare preconditioned coincidence", 600, dist_compare_behaviour},
      {10, "reorth-variance full vs window 2", 600, reorth_behaviour},
      {11, "train-2d TSS tracks exact", 900, training_behaviour},
      {12, "CLI byte-identical reruns", 600, [&] { return cli_determinism(cli); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
