#include "cli.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "markovpg/errors.hpp"
#include "markovpg/gibbs.hpp"
#include "markovpg/imputation.hpp"
#include "markovpg/io.hpp"
#include "markovpg/simulate.hpp"
#include "markovpg/summary.hpp"

namespace markovpg::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::stringstream ss;
  ss << in.rdbuf();
  return hex(fnv1a(ss.str()));
}

// Options shared by every subcommand; unset values fall back to the config.
struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains, iterations, burn_in, thin, m_imputations, threads;
  std::optional<std::string> reference_state;
};

void add_common(CLI::App* app, Common& c, bool needs_config) {
  auto* cfg = app->add_option("--config", c.config, "Run configuration (JSON) or a previous run manifest");
  if (needs_config) cfg->required();
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--chains", c.chains, "Number of chains")->check(CLI::PositiveNumber);
  app->add_option("--iterations", c.iterations, "MCMC iterations per chain");
  app->add_option("--burn-in", c.burn_in, "Iterations discarded as burn-in");
  app->add_option("--thin", c.thin, "Keep every k-th post-burn-in draw")->check(CLI::PositiveNumber);
  app->add_option("--m-imputations", c.m_imputations, "Number of imputation datasets")->check(CLI::PositiveNumber);
  app->add_option("--reference-state", c.reference_state, "Reference (zero-coefficient) state label");
  app->add_option("--threads", c.threads, "Worker threads (default: MARKOVPG_THREADS or 1)")->check(CLI::PositiveNumber);
}

std::size_t default_threads() {
  if (const char* env = std::getenv("MARKOVPG_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

RunConfig resolved_config(const Common& c) {
  RunConfig cfg = load_config(c.config);
  if (c.seed) cfg.sampler.seed = *c.seed;
  if (c.chains) cfg.sampler.chains = *c.chains;
  if (c.iterations) cfg.sampler.iterations = *c.iterations;
  if (c.burn_in) cfg.sampler.burn_in = *c.burn_in;
  if (c.thin) cfg.sampler.thin = *c.thin;
  if (c.m_imputations) cfg.m_imputations = *c.m_imputations;
  if (c.reference_state) cfg.reference_state = *c.reference_state;
  cfg.sampler.threads = c.threads.value_or(default_threads());
  (void)cfg.alphabet();
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    const std::optional<RunConfig>& cfg, std::uint64_t seed, const std::vector<fs::path>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "markovpg";
  m["version"] = kVersion;
  m["command"] = command;
  m["args"] = args;
  m["seed"] = seed;
  m["build"] = {{"compiler", __VERSION__},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)}};
  if (cfg) {
    const std::string text = config_to_json(*cfg);
    m["config_hash"] = hex(fnv1a(text));
    m["config"] = json::parse(text);
  }
  json in = json::object();
  for (const auto& p : inputs) in[fs::absolute(p).lexically_normal().string()] = file_hash(p);
  m["inputs"] = in;
  m["outputs"] = outputs;
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

std::vector<fs::path> config_inputs(const RunConfig& cfg) {
  std::vector<fs::path> in;
  for (const auto* p : {&cfg.labels, &cfg.probabilities, &cfg.covariates, &cfg.imputations})
    if (*p) in.push_back(cfg.resolve(**p));
  return in;
}

std::vector<PosteriorChain> load_chains(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("chain_", 0) == 0 && e.path().extension() == ".bin") files.push_back(e.path());
    }
  if (files.empty()) throw ConfigError("no chain_*.bin files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<PosteriorChain> chains;
  for (const auto& f : files) chains.push_back(read_chain_binary(f));
  return chains;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
  return out;
}

// ------------------------------------------------------------------ commands

int cmd_simulate(const Common& c, const std::vector<std::string>& args, const ScenarioSpec& spec_in,
                 double min_confidence, std::ostream& out) {
  ScenarioSpec spec = spec_in;
  spec.seed = c.seed.value_or(1);
  const SimScenario sc = make_scenario(spec);
  Rng rng = Rng::derive(spec.seed, {0x51ull});
  const FitData data = simulate_sequences(sc, rng);
  const auto probs = simulate_classification(data, min_confidence, rng);

  const fs::path dir = c.out;
  fs::create_directories(dir);
  write_labels_csv(dir / "labels.csv", data, data.labels);
  write_probabilities_csv(dir / "probabilities.csv", probs, data.alphabet);
  const std::vector<std::string> diurnal_cols = {"cos_time", "sin_time"};
  write_covariates_csv(dir / "covariates.csv", data, spec.diurnal ? std::span<const std::string>(diurnal_cols)
                                                                 : std::span<const std::string>());
  write_truth_csv(dir / "truth.csv", sc.truth, data.alphabet, data.layout);

  RunConfig cfg;
  cfg.base_dir = dir;
  cfg.states = data.alphabet.labels();
  cfg.individuals = data.layout.individuals;
  cfg.habitats = data.layout.habitats;
  cfg.diurnal = spec.diurnal;
  cfg.step_seconds = spec.step_seconds;
  cfg.covariates = "covariates.csv";
  cfg.sampler.seed = spec.seed;
  if (c.iterations) cfg.sampler.iterations = *c.iterations;
  if (c.burn_in) cfg.sampler.burn_in = *c.burn_in;
  if (c.thin) cfg.sampler.thin = *c.thin;
  if (c.chains) cfg.sampler.chains = *c.chains;
  if (c.m_imputations) cfg.m_imputations = *c.m_imputations;
  RunConfig labels_cfg = cfg;
  labels_cfg.labels = "labels.csv";
  cfg.probabilities = "probabilities.csv";
  std::ofstream(dir / "config.json") << config_to_json(cfg, false) << "\n";
  std::ofstream(dir / "config_labels.json") << config_to_json(labels_cfg, false) << "\n";

  const std::vector<std::string> outputs = {"labels.csv", "probabilities.csv", "covariates.csv", "truth.csv",
                                            "config.json", "config_labels.json"};
  write_manifest(dir, "simulate", args, cfg, spec.seed, {}, outputs);
  out << "simulated " << data.n_rows() << " fixes for " << data.layout.n_individuals() << " individuals into "
      << dir.string() << "\n";
  return 0;
}

int cmd_validate(const Common& c, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig cfg = resolved_config(c);
  const ModelInputs in = load_inputs(cfg);
  out << "OK\n" << in.report.to_text();
  if (c.out != ".") {
    fs::create_directories(c.out);
    std::ofstream(fs::path(c.out) / "validation.txt") << in.report.to_text();
    write_manifest(c.out, "validate", args, cfg, cfg.sampler.seed, config_inputs(cfg), {"validation.txt"});
  }
  return 0;
}

int cmd_impute(const Common& c, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig cfg = resolved_config(c);
  if (!cfg.probabilities) throw ConfigError("impute needs a 'probabilities' file in the config");
  const ModelInputs in = load_inputs(cfg);
  const ImputationSet set = draw_imputations(in.probabilities, cfg.m_imputations, cfg.sampler.seed, cfg.sampler.threads);
  const fs::path dir = c.out;
  write_imputations_csv(dir / "imputations.csv", set, in.data);
  write_labels_csv(dir / "argmax_labels.csv", in.data, argmax_labels(in.probabilities));
  write_manifest(dir, "impute", args, cfg, cfg.sampler.seed, config_inputs(cfg), {"imputations.csv", "argmax_labels.csv"});
  out << "drew " << set.size() << " imputation datasets over " << set.n_fixes() << " fixes\n";
  return 0;
}

int cmd_fit(const Common& c, const std::vector<std::string>& args, const std::string& imputations_path, bool csv,
            std::ostream& out) {
  RunConfig cfg = resolved_config(c);
  if (!imputations_path.empty()) cfg.imputations = fs::absolute(imputations_path);
  const ModelInputs in = load_inputs(cfg);
  const fs::path dir = c.out;
  fs::create_directories(dir);

  std::optional<ImputationSet> set;
  if (cfg.probabilities) {
    if (cfg.imputations) {
      set = read_imputations_csv(cfg.resolve(*cfg.imputations), in.data);
    } else {
      set = draw_imputations(in.probabilities, cfg.m_imputations, cfg.sampler.seed, cfg.sampler.threads);
    }
  } else if (cfg.imputations) {
    throw ConfigError("an imputation file needs 'probabilities' rather than 'labels' in the config");
  }

  const auto chains = run_chains(in.data, cfg.priors, cfg.sampler, set ? &*set : nullptr);
  std::vector<std::string> outputs;
  for (const auto& ch : chains) {
    const std::string name = "chain_" + std::to_string(ch.chain_index);
    write_chain_binary(dir / (name + ".bin"), ch);
    outputs.push_back(name + ".bin");
    if (csv) {
      write_chain_csv(dir / (name + ".csv"), ch);
      outputs.push_back(name + ".csv");
    }
  }
  {
    std::ofstream s(dir / "standardization.csv");
    s << "covariate,mean,sd\n";
    for (std::size_t q = 0; q < in.standardization.names.size(); ++q)
      s << in.standardization.names[q] << ',' << format_double(in.standardization.means[q]) << ','
        << format_double(in.standardization.sds[q]) << '\n';
    outputs.emplace_back("standardization.csv");
  }
  std::ofstream(dir / "validation.txt") << in.report.to_text();
  outputs.emplace_back("validation.txt");
  if (chains.size() >= 2 && chains.front().n_draws() >= 2) {
    const auto rhat = potential_scale_reduction(chains);
    const auto names = chains.front().parameter_names();
    std::ofstream d(dir / "diagnostics.csv");
    d << "parameter,rhat\n";
    for (std::size_t p = 0; p < names.size(); ++p) d << '"' << names[p] << "\"," << format_double(rhat[p]) << '\n';
    outputs.emplace_back("diagnostics.csv");
  }
  write_manifest(dir, "fit", args, cfg, cfg.sampler.seed, config_inputs(cfg), outputs);
  out << "fit " << chains.size() << " chain(s), " << chains.front().n_draws() << " kept draws each\n";
  return 0;
}

int cmd_summarize(const Common& c, const std::vector<std::string>& args, const std::string& chain_dir,
                  const std::string& truth_path, std::ostream& out) {
  const fs::path in_dir = chain_dir.empty() ? fs::path(c.out) : fs::path(chain_dir);
  const auto chains = load_chains(in_dir);
  const auto& ref = chains.front();
  const fs::path dir = c.out;
  fs::create_directories(dir);
  const auto rows = summarize(chains);
  write_summary_csv(dir / "summary.csv", rows, ref.alphabet);
  write_interval_long_csv(dir / "intervals_long.csv", rows, ref.alphabet);
  std::vector<std::string> outputs = {"summary.csv", "intervals_long.csv"};

  if (ref.layout.n_habitats() >= 2) {
    std::ofstream lng(dir / "pairwise_long.csv");
    lng << "from,to,habitat_a,habitat_b,proportion,significance\n";
    for (std::size_t i = 0; i < ref.alphabet.size(); ++i) {
      for (std::size_t k = 0; k < ref.alphabet.n_slots(); ++k) {
        const auto m = pairwise_habitat(chains, i, k);
        const std::string name = "pairwise_" + slug(ref.alphabet.label(i)) + "_" +
                                 slug(ref.alphabet.label(ref.alphabet.slot_state(k))) + ".csv";
        write_pairwise_matrix_csv(dir / name, m, ref.layout);
        outputs.push_back(name);
        for (std::size_t a = 0; a < ref.layout.n_habitats(); ++a)
          for (std::size_t b = 0; b < ref.layout.n_habitats(); ++b)
            if (a != b)
              lng << ref.alphabet.label(i) << ',' << ref.alphabet.label(m.to_state) << ',' << ref.layout.habitats[a]
                  << ',' << ref.layout.habitats[b] << ','
                  << format_double(m.proportion(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) << ','
                  << to_string(m.call(a, b)) << '\n';
      }
    }
    outputs.emplace_back("pairwise_long.csv");
  }

  std::vector<fs::path> inputs;
  if (!truth_path.empty()) {
    inputs.emplace_back(truth_path);
    const CoefficientState truth = read_truth_csv(truth_path, ref.alphabet, ref.layout);
    std::ofstream cov(dir / "coverage.csv");
    cov << "from,to,covariate,truth,lower95,upper95,covered\n";
    std::size_t covered = 0;
    for (const auto& s : rows) {
      const double t = truth.beta[s.from_state](static_cast<Eigen::Index>(s.column),
                                                static_cast<Eigen::Index>(*ref.alphabet.state_slot(s.to_state)));
      const bool in_ci = t >= s.lower && t <= s.upper;
      covered += in_ci ? 1 : 0;
      cov << ref.alphabet.label(s.from_state) << ',' << ref.alphabet.label(s.to_state) << ",\"" << s.covariate << "\","
          << format_double(t) << ',' << format_double(s.lower) << ',' << format_double(s.upper) << ','
          << (in_ci ? 1 : 0) << '\n';
    }
    outputs.emplace_back("coverage.csv");
    out << "coverage: " << covered << "/" << rows.size() << " = "
        << format_double(static_cast<double>(covered) / static_cast<double>(rows.size())) << "\n";
  }
  for (const auto& e : fs::directory_iterator(in_dir))
    if (e.path().extension() == ".bin") inputs.push_back(e.path());
  write_manifest(dir, "summarize", args, std::nullopt, ref.seed, inputs, outputs);
  out << "summarized " << rows.size() << " coefficients from " << chains.size() << " chain(s)\n";
  return 0;
}

int cmd_gof(const Common& c, const std::vector<std::string>& args, const std::string& chain_dir,
            std::optional<std::size_t> draws, std::ostream& out) {
  const RunConfig cfg = resolved_config(c);
  const ModelInputs in = load_inputs(cfg);
  const fs::path in_dir = chain_dir.empty() ? fs::path(c.out) : fs::path(chain_dir);
  const auto chains = load_chains(in_dir);
  std::vector<std::size_t> observed = in.data.labels;
  if (observed.empty()) observed = argmax_labels(in.probabilities);
  const auto report = goodness_of_fit(chains, in.data, observed, draws.value_or(cfg.gof_draws), cfg.sampler.seed);

  const fs::path dir = c.out;
  fs::create_directories(dir);
  const auto& alpha = in.data.alphabet;
  {
    std::ofstream f(dir / "gof_discrepancy.csv");
    f << "draw,observed,replicate\n";
    for (std::size_t u = 0; u < report.draw_index.size(); ++u)
      f << report.draw_index[u] << ',' << format_double(report.observed_discrepancy[u]) << ','
        << format_double(report.replicate_discrepancy[u]) << '\n';
  }
  const std::size_t n = report.replicates.size();
  std::vector<double> v(n);
  {
    std::ofstream f(dir / "gof_transitions.csv");
    f << "from,to,observed,replicate_mean,replicate_lower95,replicate_upper95,difference\n";
    for (std::size_t a = 0; a < alpha.size(); ++a)
      for (std::size_t b = 0; b < alpha.size(); ++b) {
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        for (std::size_t u = 0; u < n; ++u) v[u] = report.replicates[u].transition_frequency(ia, ib);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(n);
        const double obs = report.observed.transition_frequency(ia, ib);
        f << alpha.label(a) << ',' << alpha.label(b) << ',' << format_double(obs) << ',' << format_double(mean) << ','
          << format_double(quantile(v, 0.025)) << ',' << format_double(quantile(v, 0.975)) << ','
          << format_double(obs - mean) << '\n';
      }
  }
  {
    std::ofstream f(dir / "gof_occupancy.csv");
    f << "state,observed,replicate_mean,replicate_lower95,replicate_upper95,difference\n";
    for (std::size_t a = 0; a < alpha.size(); ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      for (std::size_t u = 0; u < n; ++u) v[u] = report.replicates[u].occupancy[ia];
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(n);
      const double obs = report.observed.occupancy[ia];
      f << alpha.label(a) << ',' << format_double(obs) << ',' << format_double(mean) << ','
        << format_double(quantile(v, 0.025)) << ',' << format_double(quantile(v, 0.975)) << ','
        << format_double(obs - mean) << '\n';
    }
  }
  {
    json s;
    s["draws_used"] = n;
    s["predictive_p_value"] = report.predictive_p_value;
    s["inside_central_95"] = report.inside_central_band(0.95);
    std::ofstream(dir / "gof_summary.json") << s.dump(2) << "\n";
  }
  auto inputs = config_inputs(cfg);
  for (const auto& e : fs::directory_iterator(in_dir))
    if (e.path().extension() == ".bin") inputs.push_back(e.path());
  write_manifest(dir, "gof", args, cfg, cfg.sampler.seed, inputs,
                 {"gof_discrepancy.csv", "gof_transitions.csv", "gof_occupancy.csv", "gof_summary.json"});
  out << "posterior predictive p-value: " << format_double(report.predictive_p_value) << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian covariate-driven Markov transition models with Polya-Gamma Gibbs sampling", "markovpg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  ScenarioSpec spec;
  double min_confidence = 0.6;
  bool no_diurnal = false;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic study (labels, probabilities, covariates, truth)");
  add_common(sim, common, false);
  sim->add_option("--individuals", spec.n_individuals)->check(CLI::PositiveNumber);
  sim->add_option("--states", spec.n_states)->check(CLI::Range(2, 64));
  sim->add_option("--habitats", spec.n_habitats);
  sim->add_option("--noise-covariates", spec.n_noise_covariates);
  sim->add_option("--steps", spec.steps, "Transitions per individual")->check(CLI::PositiveNumber);
  sim->add_option("--step-seconds", spec.step_seconds)->check(CLI::PositiveNumber);
  sim->add_option("--min-confidence", min_confidence, "Lower bound of the simulated classifier confidence")
      ->check(CLI::Range(0.0, 1.0));
  sim->add_flag("--no-diurnal", no_diurnal, "Omit the cos/sin time-of-day covariates");

  auto* val = app.add_subcommand("validate", "Load and validate the configured inputs");
  add_common(val, common, true);

  auto* imp = app.add_subcommand("impute", "Draw M label datasets from classification probabilities");
  add_common(imp, common, true);

  std::string imputations_path;
  bool csv = false;
  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler and export chains");
  add_common(fit, common, true);
  fit->add_option("--imputations", imputations_path, "Imputation file written by `impute`");
  fit->add_flag("--csv", csv, "Also export chains as CSV");

  std::string chain_dir, truth_path;
  auto* sum = app.add_subcommand("summarize", "Odds ratios, credible intervals and pairwise habitat comparisons");
  add_common(sum, common, false);
  sum->add_option("--chain-dir", chain_dir, "Directory holding chain_*.bin (default: --out)");
  sum->add_option("--truth", truth_path, "truth.csv from `simulate`; adds a coverage report");

  std::optional<std::size_t> gof_draws;
  auto* gof = app.add_subcommand("gof", "Posterior-predictive goodness-of-fit replicates");
  add_common(gof, common, true);
  gof->add_option("--chain-dir", chain_dir, "Directory holding chain_*.bin (default: --out)");
  gof->add_option("--draws", gof_draws, "Posterior draws to replicate from")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      spec.diurnal = !no_diurnal;
      return cmd_simulate(common, args, spec, min_confidence, out);
    }
    if (*val) return cmd_validate(common, args, out);
    if (*imp) return cmd_impute(common, args, out);
    if (*fit) return cmd_fit(common, args, imputations_path, csv, out);
    if (*sum) return cmd_summarize(common, args, chain_dir, truth_path, out);
    if (*gof) return cmd_gof(common, args, chain_dir, gof_draws, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace markovpg::cli
