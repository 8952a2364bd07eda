#include "ptss/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<int> threads;
  bool full_scale = false;
  std::string experiment = "quad-sweep";  // oracle only
  std::vector<std::string> sets;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* app, CommonArgs& a, const std::vector<std::string>& keys) {
  app->add_option("--config", a.config_path, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", a.seed, "base seed");
  app->add_option("--out", a.out, "output CSV path (stdout when omitted)");
  app->add_option("--replicates", a.replicates, "Monte-Carlo replicates per point");
  app->add_option("--threads", a.threads, "worker threads");
  app->add_flag("--full-scale", a.full_scale, "use full-size datasets and replicate counts");
  app->add_option("--set", a.sets, "override any config key: --set key=value");
  for (const auto& key : keys) {
    if (key == "seed" || key == "replicates" || key == "experiment") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_option_function<std::string>(
        flag, [&a, key](const std::string& v) { a.overrides[key] = v; }, "override " + key);
  }
}

ptss::ExperimentConfig resolve(ptss::Experiment e, const CommonArgs& a) {
  ptss::ExperimentConfig cfg = ptss::default_config(e, a.full_scale);
  if (!a.config_path.empty()) {
    cfg = ptss::load_config_file(a.config_path, a.full_scale);
    if (cfg.experiment != e) {
      ptss::ExperimentConfig base = ptss::default_config(e, a.full_scale);
      std::ifstream in(a.config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      ptss::apply_config_text(base, buf.str());
      base.experiment = e;
      cfg = base;
    }
  }
  for (const auto& [k, v] : a.overrides) ptss::apply_setting(cfg, k, v);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ptss::Error("--set expects key=value, got '" + s + "'");
    ptss::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.replicates) cfg.replicates = *a.replicates;
  if (a.threads) cfg.threads = *a.threads;
  if (!a.out.empty()) cfg.out = a.out;
  cfg.validate();
  return cfg;
}

void emit(const ptss::ExperimentConfig& cfg, const ptss::CsvTable& table) {
  const auto echo = ptss::config_echo(cfg);
  if (cfg.out.empty()) {
    ptss::write_csv(std::cout, echo, table);
    return;
  }
  std::ofstream out(cfg.out, std::ios::binary);
  if (!out) throw ptss::Error("cannot write '" + cfg.out + "'");
  ptss::write_csv(out, echo, table);
  if (!out) throw ptss::Error("write to '" + cfg.out + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preconditioned truncated single-sample Krylov estimators: experiment runner"};
  app.require_subcommand(1);

  std::vector<std::string> keys;
  for (const auto& kv : ptss::config_echo(ptss::ExperimentConfig{})) keys.push_back(kv.first);

  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"quad-sweep", "signed error of y^T K^-1 y: TSS vs fixed truncation"},
      {"dist-compare", "preconditioned vs unpreconditioned TSS under several distributions"},
      {"reorth-variance", "estimator spread vs reorthogonalization window"},
      {"nlml-sweep", "GP NLML and gradient estimator errors over length-scales"},
      {"train-2d", "(l, mu) training trajectories on prior-sampled labels"},
      {"train-3d", "(f, l, mu) training trajectories on Franke or CSV data"},
  };
  std::map<std::string, CommonArgs> args;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, desc] : experiments) {
    subs[name] = app.add_subcommand(name, desc);
    add_common(subs[name], args[name], keys);
  }
  CLI::App* oracle = app.add_subcommand("oracle", "dense reference values over the l grid");
  add_common(oracle, args["oracle"], keys);
  oracle->add_option("--experiment", args["oracle"].experiment, "experiment whose dataset and grid to use");

  CLI11_PARSE(app, argc, argv);

  try {
    if (oracle->parsed()) {
      const CommonArgs& a = args["oracle"];
      const ptss::ExperimentConfig cfg = resolve(ptss::parse_experiment(a.experiment), a);
      emit(cfg, ptss::to_table(ptss::run_oracle(cfg)));
      return 0;
    }
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      const ptss::ExperimentConfig cfg = resolve(ptss::parse_experiment(name), args[name]);
      const ptss::ExperimentResult res = ptss::run_experiment(cfg);
      emit(cfg, ptss::to_table(res));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
