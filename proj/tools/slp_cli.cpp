// slp_cli: SER simulation, complexity measurement and self-test.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure,
// 4 self-test failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "slp/config.hpp"
#include "slp/report.hpp"
#include "slp/selftest.hpp"

#ifndef SLP_VERSION
#define SLP_VERSION "0.0.0-unknown"
#endif

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitSelftest = 4;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir, precoders, snr, scheme, rho_convention;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "INI config file (defaults apply when omitted)");
  cmd->add_option("--seed", f.seed, "RNG seed (overrides config, then SLP_SEED)");
  cmd->add_option("--threads", f.threads, "worker threads (parallel over SNR points)");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  cmd->add_option("--precoders", f.precoders, "comma list: zf, mmse, wmmse, ci_zf, ci_mmse, ci_wmmse");
  cmd->add_option("--snr", f.snr, "SNR grid in dB: list a,b,c or range start:step:stop");
  cmd->add_option("--scheme", f.scheme, "qpsk, 8psk, 16qam, 64qam, ...");
  cmd->add_option("--rho-convention", f.rho_convention, "complex or real-literal");
}

slp::RunConfig resolve(const Flags& f) {
  const char* env = std::getenv("SLP_SEED");
  const std::optional<std::string> env_seed = env ? std::optional<std::string>(env) : std::nullopt;
  slp::RunConfig rc;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw slp::ConfigError("--config: cannot open '" + f.config + "'");
    rc = slp::parse_config(in, env_seed);
  } else {
    std::istringstream empty;
    rc = slp::parse_config(empty, env_seed);
  }
  slp::Overrides o;
  o.seed = f.seed;
  o.threads = f.threads;
  o.out_dir = f.out_dir;
  o.precoders = f.precoders;
  o.snr = f.snr;
  o.scheme = f.scheme;
  o.rho_convention = f.rho_convention;
  slp::apply_overrides(rc, o);
  slp::validate(rc);
  return rc;
}

int cmd_ser(const Flags& f) {
  const slp::RunConfig rc = resolve(f);
  const auto curves = slp::simulate_ser(rc.sim);
  const auto files = slp::write_ser_outputs(curves, rc, SLP_VERSION);
  for (const auto& c : curves) {
    std::cout << slp::precoder_name(c.kind) << '\n';
    for (const auto& p : c.points)
      std::cout << "  " << p.snr_db << " dB  ser=" << p.ser() << "  +-" << p.ci_halfwidth()
                << "  symbols=" << p.symbols << '\n';
  }
  std::cout << "wrote " << files.size() << " files and manifest.json to " << rc.out_dir << '\n';
  return 0;
}

int cmd_complexity(const Flags& f, std::optional<long long> samples) {
  slp::RunConfig rc = resolve(f);
  if (samples) rc.complexity_samples = *samples;
  slp::validate(rc);
  const auto report = slp::complexity_report(rc.sim, rc.complexity_samples);
  slp::write_complexity_outputs(report, rc, SLP_VERSION);
  std::cout << slp::complexity_summary(report);
  return 0;
}

int cmd_selftest(std::uint64_t seed, bool inject) {
  slp::SelftestOptions opt;
  opt.seed = seed;
  opt.inject_rho_mismatch = inject;
  const auto rep = slp::run_selftest(opt);
  slp::print_report(std::cout, rep);
  return rep.passed() ? 0 : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbol-level precoding toolkit"};
  app.set_version_flag("--version", SLP_VERSION);
  app.require_subcommand(1);

  Flags ser_flags, cx_flags;
  auto* ser = app.add_subcommand("ser", "simulate SER curves");
  add_common(ser, ser_flags);

  auto* cx = app.add_subcommand("complexity", "measure multiplication counts");
  add_common(cx, cx_flags);
  std::optional<long long> samples;
  cx->add_option("--samples", samples, "samples per SNR point");

  auto* st = app.add_subcommand("selftest", "run the invariant suites");
  std::uint64_t st_seed = 1;
  bool inject = false;
  st->add_option("--seed", st_seed, "seed for the suites");
  st->add_flag("--inject-rho-mismatch", inject)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*ser) return cmd_ser(ser_flags);
    if (*cx) return cmd_complexity(cx_flags, samples);
    if (*st) {
      if (st->count("--seed") == 0) {
        if (const char* env = std::getenv("SLP_SEED")) st_seed = slp::detail::parse_seed("SLP_SEED", env);
      }
      return cmd_selftest(st_seed, inject);
    }
  } catch (const slp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
