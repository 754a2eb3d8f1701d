#include "epismc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace epismc {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_int(std::int64_t v) { return std::to_string(v); }

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    std::string t = s;
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("cannot parse number '" + s + "' for " + what);
  }
}

std::int64_t parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("cannot parse integer '" + s + "' for " + what);
  }
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw config_error("cannot parse boolean '" + s + "' for " + what);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  std::size_t e = s.find_last_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

// days since 1970-01-01 for a civil date
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + static_cast<std::int64_t>(doe) - 719468LL;
}

// "YYYY-MM-DD" or a plain integer index; returns false when unparsable
bool parse_time_field(const std::string& s, std::int64_t& out) {
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    try {
      const int y = std::stoi(s.substr(0, 4));
      const int m = std::stoi(s.substr(5, 2));
      const int d = std::stoi(s.substr(8, 2));
      if (m < 1 || m > 12 || d < 1 || d > 31) return false;
      out = days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

PriorMarginal parse_prior(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  const auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')')
    throw config_error("bad prior '" + s + "' for " + key +
                       " (expected name(args), e.g. tnorm(0.6,0.3,0,inf))");
  const std::string name = s.substr(0, open);
  std::vector<double> args;
  std::stringstream ss(s.substr(open + 1, s.size() - open - 2));
  std::string item;
  while (std::getline(ss, item, ',')) args.push_back(parse_double(trim(item), key));

  if (name == "fixed" && args.size() == 1) return PriorMarginal::fixed(args[0]);
  if (name == "uniform" && args.size() == 2) return PriorMarginal::uniform(args[0], args[1]);
  if (name == "norm" && args.size() == 2) return PriorMarginal::normal(args[0], args[1]);
  if (name == "tnorm" && args.size() == 4)
    return PriorMarginal::trunc_normal(args[0], args[1], args[2], args[3]);
  throw config_error("bad prior '" + s + "' for " + key);
}

std::string describe_prior(const PriorMarginal& m) {
  std::string out;
  switch (m.kind) {
    case PriorMarginal::Kind::Fixed: out = "fixed(" + fmt(m.a) + ")"; break;
    case PriorMarginal::Kind::Uniform: out = "uniform(" + fmt(m.a) + "," + fmt(m.b) + ")"; break;
    case PriorMarginal::Kind::Normal: out = "norm(" + fmt(m.a) + "," + fmt(m.b) + ")"; break;
    case PriorMarginal::Kind::TruncNormal:
      out = "tnorm(" + fmt(m.a) + "," + fmt(m.b) + "," +
            (std::isinf(m.lower) ? std::string(m.lower < 0 ? "-inf" : "inf") : fmt(m.lower)) +
            "," + (std::isinf(m.upper) ? std::string("inf") : fmt(m.upper)) + ")";
      break;
  }
  return out;
}

const std::vector<double>* quantile_levels() {
  static const std::vector<double> levels = {0.025, 0.05, 0.125, 0.25, 0.50,
                                             0.75,  0.875, 0.95, 0.975};
  return &levels;
}

void write_bands_row(std::ofstream& out, const std::string& lead,
                     const QuantileBands& b) {
  out << lead << ',' << fmt(b.mean) << ',' << fmt(b.q025) << ',' << fmt(b.q05) << ','
      << fmt(b.q125) << ',' << fmt(b.q25) << ',' << fmt(b.q50) << ',' << fmt(b.q75) << ','
      << fmt(b.q875) << ',' << fmt(b.q95) << ',' << fmt(b.q975) << '\n';
}

QuantileBands read_bands_fields(const std::vector<std::string>& fields, std::size_t off,
                                const std::string& where) {
  if (fields.size() != off + 10) throw config_error("bad band row in " + where);
  QuantileBands b;
  b.mean = parse_double(fields[off + 0], where);
  b.q025 = parse_double(fields[off + 1], where);
  b.q05 = parse_double(fields[off + 2], where);
  b.q125 = parse_double(fields[off + 3], where);
  b.q25 = parse_double(fields[off + 4], where);
  b.q50 = parse_double(fields[off + 5], where);
  b.q75 = parse_double(fields[off + 6], where);
  b.q875 = parse_double(fields[off + 7], where);
  b.q95 = parse_double(fields[off + 8], where);
  b.q975 = parse_double(fields[off + 9], where);
  return b;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) fields.push_back(trim(item));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

constexpr const char* kBandHeader =
    "mean,q2.5,q5,q12.5,q25,q50,q75,q87.5,q95,q97.5";

}  // namespace

IncidenceSeries load_incidence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open incidence file: " + path);

  IncidenceSeries series;
  std::string line;
  int lineno = 0;
  bool have_prev = false;
  std::int64_t prev_time = 0;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty()) continue;
    const auto fields = split_csv(s);
    if (lineno == 1) {
      if (fields.size() != 2 || (fields[0] != "date" && fields[0] != "t") ||
          fields[1] != "count")
        throw config_error(path + ":1: expected header 'date,count' or 't,count'");
      continue;
    }
    if (fields.size() != 2)
      throw config_error(path + ":" + std::to_string(lineno) + ": expected 2 fields");
    std::int64_t time = 0;
    if (!parse_time_field(fields[0], time))
      throw config_error(path + ":" + std::to_string(lineno) + ": bad date/index '" +
                         fields[0] + "'");
    std::int64_t count = 0;
    try {
      count = parse_int(fields[1], "count");
    } catch (const config_error&) {
      throw config_error(path + ":" + std::to_string(lineno) + ": bad count '" +
                         fields[1] + "'");
    }
    if (count < 0)
      throw config_error(path + ":" + std::to_string(lineno) + ": negative count");
    if (have_prev) {
      if (time <= prev_time)
        throw config_error(path + ":" + std::to_string(lineno) +
                           ": times must be strictly increasing");
      if (time != prev_time + 1)
        throw config_error(path + ":" + std::to_string(lineno) +
                           ": gap in the record (missing intervals are not supported)");
    }
    prev_time = time;
    have_prev = true;
    series.labels.push_back(fields[0]);
    series.times.push_back(time);
    series.counts.push_back(count);
  }
  if (series.counts.empty()) throw config_error(path + ": no data rows");
  const std::int64_t t0 = series.times.front();
  for (auto& t : series.times) t -= t0;
  return series;
}

IncidenceSeries aggregate_weekly(const IncidenceSeries& daily) {
  if (daily.interval_days != 1)
    throw config_error("aggregate_weekly: input must be a daily series");
  IncidenceSeries weekly;
  weekly.interval_days = 7;
  const std::size_t full_weeks = daily.size() / 7;
  for (std::size_t w = 0; w < full_weeks; ++w) {
    std::int64_t acc = 0;
    for (std::size_t d = 0; d < 7; ++d) acc += daily.counts[w * 7 + d];
    weekly.labels.push_back(daily.labels[w * 7]);
    weekly.times.push_back(static_cast<std::int64_t>(w));
    weekly.counts.push_back(acc);
  }
  if (weekly.counts.empty())
    throw config_error("aggregate_weekly: fewer than 7 daily records");
  return weekly;
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& raw_key,
                        const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "model.N") cfg.model.N = parse_double(value, key);
  else if (key == "model.rho") cfg.model.rho = parse_double(value, key);
  else if (key == "model.obs") {
    if (value == "poisson") cfg.model.obs = ObsModel::Poisson;
    else if (value == "negbin") cfg.model.obs = ObsModel::NegBin;
    else throw config_error("model.obs must be poisson or negbin, got '" + value + "'");
  }
  else if (key == "model.dt") cfg.model.dt = parse_double(value, key);
  else if (key == "model.substeps") cfg.model.n_substeps = static_cast<int>(parse_int(value, key));
  else if (key == "init.S0_mean") cfg.init.S0_mean = parse_double(value, key);
  else if (key == "init.S0_sd") cfg.init.S0_sd = parse_double(value, key);
  else if (key == "init.I0_mean") cfg.init.I0_mean = parse_double(value, key);
  else if (key == "init.I0_sd") cfg.init.I0_sd = parse_double(value, key);
  else if (key == "init.E0") cfg.init.E0 = parse_double(value, key);
  else if (key == "init.R0") cfg.init.R0 = parse_double(value, key);
  else if (key == "prior.alpha") cfg.prior.marginals[0] = parse_prior(value, key);
  else if (key == "prior.gamma") cfg.prior.marginals[1] = parse_prior(value, key);
  else if (key == "prior.nu_beta") cfg.prior.marginals[2] = parse_prior(value, key);
  else if (key == "prior.phi") cfg.prior.marginals[3] = parse_prior(value, key);
  else if (key == "prior.beta0") cfg.prior.marginals[4] = parse_prior(value, key);
  else if (key == "alg.engine") {
    if (value != "enkf" && value != "bpf")
      throw config_error("alg.engine must be enkf or bpf, got '" + value + "'");
    cfg.engine = value;
  }
  else if (key == "alg.ntheta") cfg.n_theta = static_cast<int>(parse_int(value, key));
  else if (key == "alg.nx") cfg.n_inner = static_cast<int>(parse_int(value, key));
  else if (key == "alg.moves") cfg.pmmh_moves = static_cast<int>(parse_int(value, key));
  else if (key == "alg.ess_threshold") cfg.ess_threshold = parse_double(value, key);
  else if (key == "alg.proposal_scale") cfg.proposal_scale = parse_double(value, key);
  else if (key == "alg.eta") cfg.eta = parse_double(value, key);
  else if (key == "alg.unbiased") cfg.unbiased = parse_bool(value, key);
  else if (key == "alg.nc") cfg.n_c = static_cast<int>(parse_int(value, key));
  else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
  else if (key == "run.threads") cfg.threads = static_cast<int>(parse_int(value, key));
  else if (key == "run.horizon") cfg.horizon = static_cast<int>(parse_int(value, key));
  else if (key == "data.path") cfg.data_path = value;
  else if (key == "data.example") cfg.example = value;
  else if (key == "data.sim_T") cfg.sim_T = static_cast<int>(parse_int(value, key));
  else if (key == "data.seed") cfg.data_seed = static_cast<std::uint64_t>(parse_int(value, key));
  else if (key == "data.aggregate_weekly") cfg.aggregate_weekly = parse_bool(value, key);
  else if (key == "sim.beta") {
    if (!value.empty()) parse_beta_schedule(value);  // validate now
    cfg.sim_beta = value;
  }
  else if (key == "sim.alpha") cfg.sim_alpha = parse_double(value, key);
  else if (key == "sim.gamma") cfg.sim_gamma = parse_double(value, key);
  else if (key == "sim.phi") cfg.sim_phi = parse_double(value, key);
  else if (key == "sim.I0") cfg.sim_I0 = parse_double(value, key);
  else if (key == "out.dir") cfg.out_dir = value;
  else throw config_error("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_config_entries(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    entries.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return entries;
}

ExperimentConfig load_config_file(const std::string& path) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : parse_config_entries(path)) {
    try {
      apply_config_entry(cfg, k, v);
    } catch (const config_error& e) {
      throw config_error(path + ": " + e.what());
    }
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_entries(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("model.N", fmt(cfg.model.N));
  kv.emplace_back("model.rho", fmt(cfg.model.rho));
  kv.emplace_back("model.obs", cfg.model.obs == ObsModel::Poisson ? "poisson" : "negbin");
  kv.emplace_back("model.dt", fmt(cfg.model.dt));
  kv.emplace_back("model.substeps", fmt_int(cfg.model.n_substeps));
  kv.emplace_back("init.S0_mean", fmt(cfg.init.S0_mean));
  kv.emplace_back("init.S0_sd", fmt(cfg.init.S0_sd));
  kv.emplace_back("init.I0_mean", fmt(cfg.init.I0_mean));
  kv.emplace_back("init.I0_sd", fmt(cfg.init.I0_sd));
  kv.emplace_back("init.E0", fmt(cfg.init.E0));
  kv.emplace_back("init.R0", fmt(cfg.init.R0));
  kv.emplace_back("prior.alpha", describe_prior(cfg.prior.marginals[0]));
  kv.emplace_back("prior.gamma", describe_prior(cfg.prior.marginals[1]));
  kv.emplace_back("prior.nu_beta", describe_prior(cfg.prior.marginals[2]));
  kv.emplace_back("prior.phi", describe_prior(cfg.prior.marginals[3]));
  kv.emplace_back("prior.beta0", describe_prior(cfg.prior.marginals[4]));
  kv.emplace_back("alg.engine", cfg.engine);
  kv.emplace_back("alg.ntheta", fmt_int(cfg.n_theta));
  kv.emplace_back("alg.nx", fmt_int(cfg.n_inner));
  kv.emplace_back("alg.moves", fmt_int(cfg.pmmh_moves));
  kv.emplace_back("alg.ess_threshold", fmt(cfg.ess_threshold));
  kv.emplace_back("alg.proposal_scale", fmt(cfg.proposal_scale));
  kv.emplace_back("alg.eta", fmt(cfg.eta));
  kv.emplace_back("alg.unbiased", cfg.unbiased ? "true" : "false");
  kv.emplace_back("alg.nc", fmt_int(cfg.n_c));
  kv.emplace_back("run.seed", fmt_int(static_cast<std::int64_t>(cfg.seed)));
  kv.emplace_back("run.threads", fmt_int(cfg.threads));
  kv.emplace_back("run.horizon", fmt_int(cfg.horizon));
  kv.emplace_back("data.path", cfg.data_path);
  kv.emplace_back("data.example", cfg.example);
  kv.emplace_back("data.sim_T", fmt_int(cfg.sim_T));
  kv.emplace_back("data.seed", fmt_int(static_cast<std::int64_t>(cfg.data_seed)));
  kv.emplace_back("data.aggregate_weekly", cfg.aggregate_weekly ? "true" : "false");
  kv.emplace_back("sim.beta", cfg.sim_beta);
  kv.emplace_back("sim.alpha", fmt(cfg.sim_alpha));
  kv.emplace_back("sim.gamma", fmt(cfg.sim_gamma));
  kv.emplace_back("sim.phi", fmt(cfg.sim_phi));
  kv.emplace_back("sim.I0", fmt(cfg.sim_I0));
  kv.emplace_back("out.dir", cfg.out_dir);
  return kv;
}

std::function<double(double)> parse_beta_schedule(const std::string& text) {
  const std::string s = trim(text);
  const auto open = s.find('(');
  if (open == std::string::npos || s.empty() || s.back() != ')')
    throw config_error("bad sim.beta '" + s +
                       "' (expected const(v), expsin(scale,period,decay) or "
                       "bump(scale,center,width,floor))");
  const std::string name = s.substr(0, open);
  std::vector<double> a;
  std::stringstream ss(s.substr(open + 1, s.size() - open - 2));
  std::string item;
  while (std::getline(ss, item, ',')) a.push_back(parse_double(trim(item), "sim.beta"));

  if (name == "const" && a.size() == 1) {
    if (!(a[0] > 0)) throw config_error("sim.beta: const value must be > 0");
    return [v = a[0]](double) { return v; };
  }
  if (name == "expsin" && a.size() == 3) {
    if (!(a[0] > 0 && a[1] > 0 && a[2] > 0))
      throw config_error("sim.beta: expsin arguments must be > 0");
    return [s0 = a[0], period = a[1], decay = a[2]](double t) {
      return s0 * std::exp(std::sin(2 * M_PI * t / period) - t / decay);
    };
  }
  if (name == "bump" && a.size() == 4) {
    if (!(a[0] > 0 && a[2] > 0 && a[3] >= 0))
      throw config_error("sim.beta: bump needs positive scale/width and floor >= 0");
    return [s0 = a[0], c = a[1], w = a[2], fl = a[3]](double t) {
      const double u = (t - c) / w;
      return s0 * std::exp(-u * u) + fl;
    };
  }
  throw config_error("bad sim.beta '" + s + "'");
}

void validate_config(const ExperimentConfig& cfg) {
  if (!(cfg.model.N > 0)) throw config_error("model.N must be > 0");
  if (!(cfg.model.rho > 0 && cfg.model.rho <= 1))
    throw config_error("model.rho must be in (0, 1]");
  if (!(cfg.model.dt > 0)) throw config_error("model.dt must be > 0");
  if (cfg.model.n_substeps < 1) throw config_error("model.substeps must be >= 1");
  if (cfg.n_theta < 2) throw config_error("alg.ntheta must be >= 2");
  if (cfg.n_inner < 5) throw config_error("alg.nx must be >= 5");
  if (cfg.pmmh_moves < 0) throw config_error("alg.moves must be >= 0");
  if (!(cfg.ess_threshold >= 0 && cfg.ess_threshold <= 1))
    throw config_error("alg.ess_threshold is a fraction of ntheta in [0, 1]");
  if (!(cfg.proposal_scale > 0)) throw config_error("alg.proposal_scale must be > 0");
  if (!(cfg.eta > 0)) throw config_error("alg.eta must be > 0");
  if (cfg.n_c < 1) throw config_error("alg.nc must be >= 1");
  if (cfg.horizon < 1) throw config_error("run.horizon must be >= 1");
  if (!cfg.data_path.empty() && !std::filesystem::exists(cfg.data_path))
    throw config_error("data.path does not exist: " + cfg.data_path);
  if (!cfg.example.empty() && cfg.example != "example1" && cfg.example != "example2")
    throw config_error("data.example must be example1 or example2");
  if (cfg.example.empty() && cfg.data_path.empty() && cfg.sim_beta.empty())
    throw config_error("one of data.path, data.example or sim.beta is required");
  if (cfg.example.empty() && !cfg.sim_beta.empty()) {
    if (cfg.sim_alpha <= 0 || cfg.sim_gamma <= 0)
      throw config_error("custom simulation needs sim.alpha and sim.gamma > 0");
    if (cfg.sim_I0 < 0) throw config_error("custom simulation needs sim.I0 >= 0");
    if (cfg.sim_T < 1) throw config_error("custom simulation needs data.sim_T >= 1");
  }
}

std::string write_results(const std::string& out_dir, const ExperimentConfig& cfg,
                          const std::string& command, const FitArtifacts& artifacts) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  nlohmann::ordered_json manifest;
  manifest["command"] = command;

  nlohmann::ordered_json jcfg;
  for (const auto& [k, v] : config_entries(cfg)) jcfg[k] = v;
  manifest["config"] = jcfg;

  std::vector<std::string> outputs;

  if (!artifacts.history.empty()) {
    const std::string path = out_dir + "/param_history.csv";
    std::ofstream out(path);
    out << "time,param,mean,sd,q2.5,q25,q50,q75,q97.5\n";
    for (const auto& row : artifacts.history) {
      for (std::size_t k = 0; k < artifacts.free_params.size(); ++k) {
        const auto& s = row.params[k];
        out << row.t << ',' << ParamVector::name(artifacts.free_params[k]) << ','
            << fmt(s.mean) << ',' << fmt(s.sd) << ',' << fmt(s.q025) << ',' << fmt(s.q25)
            << ',' << fmt(s.q50) << ',' << fmt(s.q75) << ',' << fmt(s.q975) << '\n';
      }
    }
    outputs.push_back("param_history.csv");
  }

  if (!artifacts.final_thetas.empty()) {
    const std::string path = out_dir + "/posterior_samples.csv";
    std::ofstream out(path);
    out << "index,weight,alpha,gamma,nu_beta,phi,beta0\n";
    for (std::size_t m = 0; m < artifacts.final_thetas.size(); ++m) {
      const auto& th = artifacts.final_thetas[m];
      out << m << ',' << fmt(artifacts.final_weights[m]) << ',' << fmt(th.alpha) << ','
          << fmt(th.gamma) << ',' << fmt(th.nu_beta) << ',' << fmt(th.phi) << ','
          << fmt(th.beta0) << '\n';
    }
    outputs.push_back("posterior_samples.csv");
  }

  if (!artifacts.state_posterior.rows.empty()) {
    const std::string path = out_dir + "/state_posterior.csv";
    std::ofstream out(path);
    out << "time,quantity," << kBandHeader << "\n";
    for (std::size_t t = 0; t < artifacts.state_posterior.rows.size(); ++t)
      for (int k = 0; k < kNumQuantities; ++k)
        write_bands_row(out, std::to_string(t) + "," + quantity_name(k),
                        artifacts.state_posterior.rows[t][k]);
    outputs.push_back("state_posterior.csv");
  }

  nlohmann::ordered_json diag;
  diag["completed"] = artifacts.completed;
  diag["abort_step"] = artifacts.abort_step;
  diag["message"] = artifacts.message;
  diag["n_rejuvenations"] = artifacts.diagnostics.n_rejuvenations;
  diag["total_seconds"] = artifacts.diagnostics.total_seconds;
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& s : artifacts.diagnostics.steps) {
    nlohmann::ordered_json js;
    js["t"] = s.t;
    js["ess"] = s.ess;
    js["rejuvenated"] = s.rejuvenated;
    js["acceptance_rate"] = s.acceptance_rate;
    js["seconds"] = s.seconds;
    steps.push_back(js);
  }
  diag["steps"] = steps;
  manifest["diagnostics"] = diag;
  manifest["outputs"] = outputs;

  const std::string manifest_path = out_dir + "/manifest.json";
  std::ofstream mout(manifest_path);
  mout << manifest.dump(2) << '\n';
  return manifest_path;
}

void write_forecast_csv(const std::string& path, const ForecastFan& fan) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write forecast file: " + path);
  out << "horizon,quantity," << kBandHeader << "\n";
  for (const auto& row : fan.rows) {
    write_bands_row(out, std::to_string(row.horizon) + ",obs", row.obs);
    for (int k = 0; k < kNumQuantities; ++k)
      write_bands_row(out, std::to_string(row.horizon) + "," + quantity_name(k),
                      row.latent[k]);
  }
}

void write_simulation_csvs(const std::string& out_dir, const SimulatedEpidemic& sim,
                           const ParamVector& truth, const ModelConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/data.csv");
    out << "t,count\n";
    for (std::size_t t = 0; t < sim.observations.size(); ++t)
      out << (t + 1) << ',' << sim.observations[t] << '\n';
  }
  {
    std::ofstream out(out_dir + "/truth.csv");
    out << "t,S,E,I,R,Z,beta,r_eff\n";
    for (std::size_t t = 0; t < sim.path.size(); ++t) {
      const auto& s = sim.path[t];
      out << t << ',' << fmt(s.S) << ',' << fmt(s.E) << ',' << fmt(s.I) << ',' << fmt(s.R)
          << ',' << fmt(s.Z) << ',' << fmt(std::exp(s.log_beta)) << ','
          << fmt(effective_reproduction(s, truth, cfg.N)) << '\n';
    }
  }
}

ExperimentConfig config_from_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw config_error("cannot open manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw config_error("cannot parse manifest " + manifest_path + ": " + e.what());
  }
  if (!manifest.contains("config"))
    throw config_error("manifest has no config object: " + manifest_path);
  ExperimentConfig cfg;
  for (const auto& [k, v] : manifest["config"].items())
    apply_config_entry(cfg, k, v.get<std::string>());
  return cfg;
}

std::vector<PosteriorSample> load_posterior_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open posterior samples: " + path);
  std::vector<PosteriorSample> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty()) continue;
    if (lineno == 1) continue;  // header
    const auto f = split_csv(s);
    if (f.size() != 7) throw config_error(path + ": bad row at line " + std::to_string(lineno));
    PosteriorSample ps;
    ps.weight = parse_double(f[1], "weight");
    ps.theta.alpha = parse_double(f[2], "alpha");
    ps.theta.gamma = parse_double(f[3], "gamma");
    ps.theta.nu_beta = parse_double(f[4], "nu_beta");
    ps.theta.phi = parse_double(f[5], "phi");
    ps.theta.beta0 = parse_double(f[6], "beta0");
    samples.push_back(ps);
  }
  if (samples.empty()) throw config_error(path + ": no samples");
  return samples;
}

std::vector<HistoryRow> load_param_history(const std::string& path,
                                           std::vector<int>& free_params) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open param history: " + path);
  std::vector<HistoryRow> rows;
  free_params.clear();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || lineno == 1) continue;
    const auto f = split_csv(s);
    if (f.size() != 9) throw config_error(path + ": bad row at line " + std::to_string(lineno));
    const int t = static_cast<int>(parse_int(f[0], "time"));
    const int param = ParamVector::index_of(f[1].c_str());
    if (param < 0) throw config_error(path + ": unknown parameter '" + f[1] + "'");
    if (rows.empty() || rows.back().t != t) {
      rows.push_back(HistoryRow{});
      rows.back().t = t;
    }
    if (rows.size() == 1) free_params.push_back(param);
    ParamSummary ps;
    ps.mean = parse_double(f[2], "mean");
    ps.sd = parse_double(f[3], "sd");
    ps.q025 = parse_double(f[4], "q2.5");
    ps.q25 = parse_double(f[5], "q25");
    ps.q50 = parse_double(f[6], "q50");
    ps.q75 = parse_double(f[7], "q75");
    ps.q975 = parse_double(f[8], "q97.5");
    rows.back().params.push_back(ps);
  }
  return rows;
}

StatePosterior load_state_posterior(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open state posterior: " + path);
  StatePosterior sp;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || lineno == 1) continue;
    const auto f = split_csv(s);
    if (f.size() != 12)
      throw config_error(path + ": bad row at line " + std::to_string(lineno));
    const std::size_t t = static_cast<std::size_t>(parse_int(f[0], "time"));
    int q = -1;
    for (int k = 0; k < kNumQuantities; ++k)
      if (f[1] == quantity_name(k)) q = k;
    if (q < 0) throw config_error(path + ": unknown quantity '" + f[1] + "'");
    if (sp.rows.size() <= t) sp.rows.resize(t + 1);
    sp.rows[t][q] = read_bands_fields(f, 2, path);
  }
  return sp;
}

}  // namespace epismc
