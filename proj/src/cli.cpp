#include "recon/cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "recon/analysis.hpp"
#include "recon/error.hpp"
#include "recon/filter.hpp"
#include "recon/identify.hpp"
#include "recon/sampler.hpp"
#include "recon/ssm.hpp"
#include "recon/vintages.hpp"

namespace recon {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir);
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

std::vector<std::string> state_names(const ReconConfig& config) {
  std::vector<std::string> names{"truth"};
  for (int j = 1; j < config.p; ++j) names.push_back("truth_lag" + std::to_string(j));
  for (const char* block : {"news", "noise"})
    for (int s = 0; s < 2; ++s)
      for (int i = 1; i <= config.l; ++i)
        names.push_back(std::string(block) + "_s" + std::to_string(s) + "_" + std::to_string(i));
  return names;
}

std::string states_csv(const Eigen::MatrixXd& states, const ReconConfig& config, Quarter first) {
  std::string out = "period";
  for (const auto& n : state_names(config)) out += "," + n;
  out += '\n';
  for (Eigen::Index t = 0; t < states.rows(); ++t) {
    out += Quarter::from_index(first.index() + static_cast<int>(t)).str();
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, states(t, j));
      out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

struct Manifest {
  json body = json::object();

  explicit Manifest(const std::string& command) {
    body["tool"] = "recon";
    body["version"] = kToolVersion;
    body["command"] = command;
    body["started_at"] = run_timestamp();
    body["inputs"] = json::object();
    body["outputs"] = json::object();
  }
  void input(const std::string& role, const std::string& path) {
    body["inputs"][role] = {{"path", path}, {"sha256", sha256_file(path)}};
  }
  void output(const fs::path& path) { body["outputs"][path.filename().string()] = sha256_file(path.string()); }
  void write(const fs::path& dir) {
    body["finished_at"] = run_timestamp();
    write_text(dir / "manifest.json", body.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, params, out, first = "2000Q1";
  int horizon = 0;
  std::uint64_t seed = 20180801;
  std::vector<std::string> drop;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.horizon < 1) throw InputError("simulate: --horizon must be >= 1");
  const ReconConfig config = read_config_file(a.config);
  const ParamVector params = read_params_file(a.params, config);
  const Quarter first = Quarter::parse(a.first);
  const StateSpaceModel model = build_state_space(config, params);
  const Simulation sim = simulate(model, a.horizon, a.seed);

  ObservationMatrix obs = ObservationMatrix::from_values(sim.observations, first);
  for (const auto& spec : a.drop) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw InputError("--drop expects SERIES:RELEASE, got '" + spec + "'");
    int s = 0, r = 0;
    try {
      s = std::stoi(spec.substr(0, colon));
      r = std::stoi(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw InputError("--drop expects SERIES:RELEASE, got '" + spec + "'");
    }
    if (s < 0 || s > 1 || r < 1 || r > config.l) throw InputError("--drop out of range: " + spec);
    const Eigen::Index col = model.layout.column(s, r);
    obs.missing.col(col).setConstant(true);
    obs.values.col(col).setConstant(std::numeric_limits<double>::quiet_NaN());
  }

  make_dir(a.out);
  const fs::path dir(a.out);
  Manifest manifest("simulate");
  manifest.input("config", a.config);
  manifest.input("params", a.params);
  manifest.body["config"] = to_json(config);
  manifest.body["params"] = to_json(params, config);
  manifest.body["settings"] = {{"horizon", a.horizon}, {"first_period", first.str()}, {"drop", a.drop}};
  manifest.body["seed"] = a.seed;

  write_text(dir / "vintages.csv", serialize_vintage_csv(to_panel(obs, config.l)));
  write_text(dir / "states.csv", states_csv(sim.states, config, first));
  manifest.output(dir / "vintages.csv");
  manifest.output(dir / "states.csv");
  manifest.write(dir);
  out << "simulated " << a.horizon << " periods (" << obs.count_observed() << " observations) into " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string config, priors, data, out;
  McmcSettings settings;
  bool no_states = false;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const ReconConfig config = read_config_file(a.config);
  const PriorSpec priors = a.priors.empty() ? PriorSpec::defaults(config) : read_priors_file(a.priors, config);
  const VintagePanel panel = read_vintage_csv(a.data);
  const ObservationMatrix obs = to_observation_matrix(panel, config);
  McmcSettings settings = a.settings;
  settings.store_states = !a.no_states;
  settings.validate();

  const PosteriorDraws draws = run_gibbs(config, obs, priors, settings);

  make_dir(a.out);
  const fs::path dir(a.out);
  Manifest manifest("estimate");
  manifest.input("config", a.config);
  if (!a.priors.empty()) manifest.input("priors", a.priors);
  manifest.input("data", a.data);
  manifest.body["config"] = to_json(config);
  manifest.body["priors"] = to_json(priors, config);
  manifest.body["settings"] = to_json(settings);
  manifest.body["seed"] = settings.seed;

  write_posterior(draws, a.out);

  json summary;
  summary["kept_draws"] = draws.num_draws();
  summary["rejected_sweeps"] = draws.rejected_sweeps;
  summary["data_offset"] = draws.data_offset;
  summary["settings"] = to_json(settings);
  json params = json::array();
  for (const auto& s : draws.summaries())
    params.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"q05", s.q05}, {"q50", s.q50}, {"q95", s.q95}});
  summary["parameters"] = params;
  json rec = json::object();
  for (Eigen::Index k = 0; k < draws.theta.cols(); ++k) {
    const Eigen::VectorXd rm = recursive_mean(draws, k);
    rec[draws.names[static_cast<std::size_t>(k)]] = std::vector<double>(rm.data(), rm.data() + rm.size());
  }
  summary["recursive_means"] = rec;
  summary["dynamics"] = to_json(dynamics_pairs(draws));
  json initial = json::array();
  for (const auto& p : draws.initial) initial.push_back(to_json(p, config));
  summary["initial_values"] = initial;
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  std::vector<std::string> files{"draws.csv", "observations.csv", "config.json", "posterior.json", "summary.json"};
  if (draws.has_states()) {
    write_text(dir / "reconciled.csv", reconciled_csv(reconciled_series(draws)));
    files.push_back("states.bin");
    files.push_back("reconciled.csv");
  }
  for (const auto& f : files) manifest.output(dir / f);
  manifest.write(dir);

  out << std::left << std::setw(18) << "parameter" << std::right << std::setw(12) << "mean" << std::setw(12) << "sd"
      << std::setw(12) << "q05" << std::setw(12) << "q95" << "\n";
  for (const auto& s : draws.summaries())
    out << std::left << std::setw(18) << s.name << std::right << std::setw(12) << fmt(s.mean) << std::setw(12)
        << fmt(s.sd) << std::setw(12) << fmt(s.q05) << std::setw(12) << fmt(s.q95) << "\n";
  out << draws.num_draws() << " kept draws written to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct IdentifyArgs {
  int l = 2, p = 1, l1 = 0;
  bool spillovers = false;
  std::string cross_news = "none", cross_noise = "none", out;
};

int cmd_identify(const IdentifyArgs& a, std::ostream& out) {
  IdentifyFlags flags;
  flags.spillovers = a.spillovers;
  flags.cross_news = parse_cross_mode(a.cross_news);
  flags.cross_noise = parse_cross_mode(a.cross_noise);
  const MomentCount count = a.l1 > 0 ? count_moments(a.l, a.l1, a.p, flags) : count_moments(a.l, a.p, flags);
  out << format_table(count);
  if (!a.out.empty()) write_text(a.out, to_json(count).dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DecomposeArgs {
  std::string draws, out;
  int series = 0, first = 1, last = 0;
};

int cmd_decompose(const DecomposeArgs& a, std::ostream& out) {
  const PosteriorDraws draws = read_posterior(a.draws);
  const int last = a.last > 0 ? a.last : draws.config.l;
  const DecompositionSeries d = historical_decomposition(draws, a.series, a.first, last);
  const std::string csv = decomposition_csv(d);
  const std::string path = a.out.empty() ? (fs::path(a.draws) / ("decomposition_s" + std::to_string(a.series) + ".csv")).string()
                                         : a.out;
  write_text(path, csv);
  out << csv;
  out << "# max identity error " << fmt(d.max_identity_error, 3) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GainsArgs {
  std::string config, params, out;
};

int cmd_gains(const GainsArgs& a, std::ostream& out) {
  const ReconConfig config = read_config_file(a.config);
  const ParamVector params = read_params_file(a.params, config);
  const StateSpaceModel model = build_state_space(config, params);
  const auto weights = kalman_gain_weights(model);
  json rows = json::array();
  out << std::left << std::setw(8) << "series" << std::setw(10) << "release" << std::setw(16) << "label" << std::right
      << std::setw(12) << "weight" << "\n";
  for (const auto& w : weights) {
    const std::string label = config.release_label(w.series, w.release);
    out << std::left << std::setw(8) << w.series << std::setw(10) << w.release << std::setw(16) << label << std::right
        << std::setw(12) << fmt(w.weight, 4) << "\n";
    rows.push_back({{"series", w.series}, {"release", w.release}, {"label", label}, {"weight", w.weight}});
  }
  if (!a.out.empty()) write_text(a.out, json{{"weights", rows}}.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FilterArgs {
  std::string config, params, data, out;
};

int cmd_filter(const FilterArgs& a, std::ostream& out) {
  const ReconConfig config = read_config_file(a.config);
  const ParamVector params = read_params_file(a.params, config);
  const ObservationMatrix obs = to_observation_matrix(read_vintage_csv(a.data), config);
  const StateSpaceModel model = build_state_space(config, params);
  const FilterResult f = kalman_filter(model, obs);
  const SmootherResult s = kalman_smoother(model, f);
  const std::string csv = filter_result_csv(model, f, s, obs.first_period);
  if (a.out.empty())
    out << csv;
  else
    write_text(a.out, csv);
  out << "loglik " << std::setprecision(17) << f.loglik << "\n";
  return kExitOk;
}

}  // namespace

std::string sha256_file(const std::string& path) { return sha256_hex(slurp(path)); }

std::string run_timestamp() {
  std::time_t now = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
    try {
      now = static_cast<std::time_t>(std::stoll(env));
    } catch (const std::exception&) {
      throw InputError("SOURCE_DATE_EPOCH is not an integer");
    }
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reconcile revised data vintages of two measurements of one latent series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate a vintage panel and its true states");
  s->add_option("--config", sim.config, "Model config (JSON)")->required();
  s->add_option("--params", sim.params, "Parameter values (JSON)")->required();
  s->add_option("--horizon", sim.horizon, "Number of periods")->required();
  s->add_option("--seed", sim.seed, "Random seed");
  s->add_option("--first-period", sim.first, "First period, YYYYQn");
  s->add_option("--drop", sim.drop, "Blank a release column, SERIES:RELEASE (repeatable)");
  s->add_option("--out", sim.out, "Output directory")->required();

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Run the Gibbs sampler");
  e->add_option("--config", est.config, "Model config (JSON)")->required();
  e->add_option("--priors", est.priors, "Prior overrides (JSON)");
  e->add_option("--data", est.data, "Vintage CSV")->required();
  e->add_option("--out", est.out, "Output directory")->required();
  e->add_option("--seed", est.settings.seed, "Master seed");
  e->add_option("--chains", est.settings.chains, "Independent chains");
  e->add_option("--iterations", est.settings.iterations, "Sweeps per chain");
  e->add_option("--burn-in", est.settings.burn_in, "Discarded sweeps per chain");
  e->add_option("--thin", est.settings.thin, "Keep every n-th sweep after burn-in");
  e->add_flag("--no-states", est.no_states, "Do not store state draws");

  IdentifyArgs idn;
  auto* i = app.add_subcommand("identify", "Count moments and parameters");
  i->add_option("--l", idn.l, "Releases per series (series 0 when --l1 is given)");
  i->add_option("--l1", idn.l1, "Releases of series 1, if different");
  i->add_option("--p", idn.p, "AR order of the truth");
  i->add_flag("--spillovers", idn.spillovers, "Own-lag dynamics in news and noise");
  i->add_option("--cross-news", idn.cross_news, "none|contemporaneous|unrestricted");
  i->add_option("--cross-noise", idn.cross_noise, "none|contemporaneous|unrestricted");
  i->add_option("--out", idn.out, "Write the count as JSON");

  DecomposeArgs dec;
  auto* d = app.add_subcommand("decompose", "News/noise decomposition of total revisions");
  d->add_option("--draws", dec.draws, "Estimation output directory")->required();
  d->add_option("--series", dec.series, "Series 0 or 1");
  d->add_option("--first", dec.first, "Early release (default 1)");
  d->add_option("--last", dec.last, "Late release (default l)");
  d->add_option("--out", dec.out, "CSV path");

  GainsArgs gn;
  auto* g = app.add_subcommand("gains", "Steady-state Kalman gain on each release");
  g->add_option("--config", gn.config, "Model config (JSON)")->required();
  g->add_option("--params", gn.params, "Parameter values (JSON)")->required();
  g->add_option("--out", gn.out, "Write weights as JSON");

  FilterArgs flt;
  auto* f = app.add_subcommand("filter", "Filter and smooth data at fixed parameters");
  f->add_option("--config", flt.config, "Model config (JSON)")->required();
  f->add_option("--params", flt.params, "Parameter values (JSON)")->required();
  f->add_option("--data", flt.data, "Vintage CSV")->required();
  f->add_option("--out", flt.out, "CSV path (stdout if omitted)");

  std::vector<std::string> argv_store{"recon"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "recon: " << ex.what() << "\n";
    return kExitInput;
  }

  try {
    if (*s) return cmd_simulate(sim, out);
    if (*e) return cmd_estimate(est, out);
    if (*i) return cmd_identify(idn, out);
    if (*d) return cmd_decompose(dec, out);
    if (*g) return cmd_gains(gn, out);
    if (*f) return cmd_filter(flt, out);
  } catch (const InputError& ex) {
    err << "recon: input error: " << ex.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& ex) {
    err << "recon: numerical error: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& ex) {
    err << "recon: error: " << ex.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace recon
