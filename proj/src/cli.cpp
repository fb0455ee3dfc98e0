#include "pmsim/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "pmsim/analysis.hpp"
#include "pmsim/channel.hpp"

namespace pmsim {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string csv_header() {
  return "scheme,K,N,p,C,lambda,mu,gamma,epsilon,trials,mean_rate_EKtau,rate_KEtau,"
         "mean_Td_seconds,stderr_Td,fer,mean_tau\n";
}

std::string csv_row(const SweepRow& r) {
  std::string line;
  line += scheme_name(r.scheme);
  line += ',';
  line += std::to_string(r.K);
  line += ',';
  line += std::to_string(r.N);
  line += ',';
  line += fmt(r.p);
  line += ',';
  line += fmt(r.C);
  line += ',';
  line += fmt(r.lambda);
  line += ',';
  line += fmt(r.mu);
  line += ',';
  line += fmt(r.gamma);
  line += ',';
  line += fmt(r.epsilon);
  line += ',';
  line += std::to_string(r.trials);
  line += ',';
  line += fmt(r.mean_rate_ektau);
  line += ',';
  line += fmt(r.rate_ketau);
  line += ',';
  line += fmt(r.mean_td);
  line += ',';
  line += fmt(r.stderr_td);
  line += ',';
  line += fmt(r.fer);
  line += ',';
  line += fmt(r.mean_tau);
  line += '\n';
  return line;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed number in list: '" + token + "'");
    }
    if (pos != token.size())
      throw std::invalid_argument("malformed number in list: '" + token + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

namespace {

struct CommonFlags {
  std::string scheme = "spm";
  int K = 240;
  int N = 8;
  double p = -1.0;
  double cap = -1.0;
  double lambda = -1.0;
  double gamma = -1.0;
  double mu = 1.0;
  double epsilon = 1e-3;
  long long trials = 100;
  std::uint64_t seed = 1;
  std::string out_path = "-";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_channel, bool with_gamma) {
  cmd->add_option("--scheme", f.scheme, "coding scheme: spm|sce|sbc|repetition");
  cmd->add_option("--K", f.K, "message length in bits");
  cmd->add_option("--N", f.N, "sub-block count (sbc scheme)");
  if (with_channel) {
    cmd->add_option("--p", f.p, "channel crossover probability");
    cmd->add_option("--capacity", f.cap, "channel capacity (alternative to --p)");
  }
  if (with_gamma) {
    cmd->add_option("--lambda", f.lambda, "bit arrival rate [bits/s]");
    cmd->add_option("--gamma", f.gamma, "arrival/symbol rate ratio (alternative to --lambda)");
  }
  cmd->add_option("--mu", f.mu, "channel symbol rate [symbols/s]");
  cmd->add_option("--epsilon", f.epsilon, "target frame error probability");
  cmd->add_option("--trials", f.trials, "Monte Carlo trials per cell");
  cmd->add_option("--seed", f.seed, "base random seed");
  cmd->add_option("--out", f.out_path, "output path, or - for stdout");
}

ChannelParams channel_from_flags(const CommonFlags& f) {
  if (f.p >= 0.0 && f.cap >= 0.0)
    throw std::invalid_argument("--p and --capacity are mutually exclusive");
  if (f.p < 0.0 && f.cap < 0.0)
    throw std::invalid_argument("one of --p or --capacity is required");
  if (f.p >= 0.0) return make_channel(f.p);
  if (!(f.cap > 0.0 && f.cap < 1.0))
    throw std::invalid_argument("--capacity must lie in (0, 1)");
  return make_channel(crossover_for_capacity(f.cap));
}

double lambda_from_flags(const CommonFlags& f) {
  if (f.lambda >= 0.0 && f.gamma >= 0.0)
    throw std::invalid_argument("--lambda and --gamma are mutually exclusive");
  if (f.lambda >= 0.0) return f.lambda;
  if (f.gamma >= 0.0) return f.gamma * f.mu;
  throw std::invalid_argument("one of --lambda or --gamma is required");
}

SimConfig config_from_flags(const CommonFlags& f, bool with_channel, bool with_gamma) {
  SimConfig config;
  const auto scheme = scheme_from_name(f.scheme);
  if (!scheme) throw std::invalid_argument("unknown scheme '" + f.scheme + "'");
  config.scheme = *scheme;
  config.K = f.K;
  config.N = f.N;
  if (with_channel) config.params = channel_from_flags(f);
  config.mu = f.mu;
  config.lambda = with_gamma ? lambda_from_flags(f) : f.mu;
  config.epsilon = f.epsilon;
  config.trials = f.trials;
  config.seed = f.seed;
  return config;
}

int emit(const std::string& text, const std::string& out_path, std::ostream& out,
         std::ostream& err) {
  if (out_path == "-") {
    out << text;
    return 0;
  }
  std::ofstream file(out_path, std::ios::binary);
  if (!file) {
    err << "error: cannot open output file '" << out_path << "'\n";
    return 2;
  }
  file << text;
  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"posterior-matching feedback coding simulator for the BSC"};
  app.require_subcommand(1);

  CommonFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "run one configuration and emit a CSV row");
  add_common(simulate, sim_flags, true, true);

  CommonFlags sweep_flags;
  std::string sweep_gammas, sweep_caps;
  auto* sweep_cmd = app.add_subcommand("sweep", "cross-product sweep over capacities and gammas");
  add_common(sweep_cmd, sweep_flags, false, false);
  sweep_cmd->add_option("--gammas", sweep_gammas, "comma-separated gamma values")->required();
  sweep_cmd->add_option("--capacities", sweep_caps, "comma-separated capacities")->required();

  CommonFlags bounds_flags;
  std::string bounds_gammas;
  auto* bounds_cmd =
      app.add_subcommand("bounds", "decoding-time bounds (arrival floor, traditional, SCE)");
  bounds_cmd->add_option("--K", bounds_flags.K, "message length in bits");
  bounds_cmd->add_option("--mu", bounds_flags.mu, "channel symbol rate [symbols/s]");
  bounds_cmd->add_option("--capacity", bounds_flags.cap, "channel capacity")->required();
  bounds_cmd->add_option("--gammas", bounds_gammas, "comma-separated gamma values")->required();
  bounds_cmd->add_option("--out", bounds_flags.out_path, "output path, or - for stdout");

  double weight_p = -1.0;
  double weight_step = 1e-3;
  std::string weight_out = "-";
  auto* weight_cmd =
      app.add_subcommand("weight", "expected posterior update E[w] and derivatives over P0");
  weight_cmd->add_option("--p", weight_p, "channel crossover probability")->required();
  weight_cmd->add_option("--grid-step", weight_step, "P0 grid step");
  weight_cmd->add_option("--out", weight_out, "output path, or - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream help;
      app.exit(e, help, help);
      out << help.str();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    std::string text;
    std::string out_path = "-";
    if (simulate->parsed()) {
      SimConfig config = config_from_flags(sim_flags, true, true);
      config.seed = mix_seed(config.seed, 0);  // matches the first cell of a sweep
      config.validate();
      text = csv_header() + csv_row(run_cell(config));
      out_path = sim_flags.out_path;
    } else if (sweep_cmd->parsed()) {
      SimConfig base = config_from_flags(sweep_flags, false, false);
      const auto gammas = parse_double_list(sweep_gammas);
      const auto capacities = parse_double_list(sweep_caps);
      text = csv_header();
      for (const auto& row : sweep(base, gammas, capacities)) text += csv_row(row);
      out_path = sweep_flags.out_path;
    } else if (bounds_cmd->parsed()) {
      if (!(bounds_flags.cap > 0.0 && bounds_flags.cap < 1.0))
        throw std::invalid_argument("--capacity must lie in (0, 1)");
      const auto gammas = parse_double_list(bounds_gammas);
      text = "gamma,K_over_lambda,traditional_bound,sce_bound\n";
      for (const double gamma : gammas) {
        if (!(gamma > 0.0)) throw std::invalid_argument("gamma values must be positive");
        const double lambda = gamma * bounds_flags.mu;
        text += fmt(gamma);
        text += ',';
        text += fmt(static_cast<double>(bounds_flags.K) / lambda);
        text += ',';
        text += fmt(traditional_bound(bounds_flags.K, lambda, bounds_flags.mu, bounds_flags.cap));
        text += ',';
        text += fmt(sce_bound(bounds_flags.K, lambda, bounds_flags.mu, bounds_flags.cap));
        text += '\n';
      }
      out_path = bounds_flags.out_path;
    } else if (weight_cmd->parsed()) {
      const ChannelParams params = make_channel(weight_p);
      if (!(weight_step > 0.0 && weight_step <= 0.5))
        throw std::invalid_argument("--grid-step must lie in (0, 1/2]");
      // i/n grid rather than accumulated steps, so P0 = 1/2 is hit exactly.
      const long long n = std::max<long long>(2, std::llround(1.0 / weight_step));
      std::vector<double> grid;
      grid.reserve(static_cast<std::size_t>(n) + 1);
      for (long long i = 0; i <= n; ++i)
        grid.push_back(static_cast<double>(i) / static_cast<double>(n));
      std::size_t argmax = 0;
      for (std::size_t i = 1; i < grid.size(); ++i)
        if (expected_weight(grid[i], params) > expected_weight(grid[argmax], params)) argmax = i;
      text = "P0,expected_weight,d1,d2,is_argmax\n";
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p0 = grid[i];
        text += fmt(p0);
        text += ',';
        text += fmt(expected_weight(p0, params));
        text += ',';
        text += fmt(expected_weight_d1(p0, params));
        text += ',';
        text += fmt(expected_weight_d2(p0, params));
        text += ',';
        text += (i == argmax) ? '1' : '0';
        text += '\n';
      }
      out_path = weight_out;
    }
    return emit(text, out_path, out, err);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pmsim
