#pragma once

// Experiment configuration: INI-style `key = value` lines grouped in sections.
//
//   [system]      N, K, scheme, psk_offset, P_T
//   [precoder]    kinds, rho_convention, omega
//   [simulation]  snr_db, block_length, min_symbol_errors, min_symbols,
//                 max_symbols, seed, threads
//   [complexity]  samples            (per SNR point)
//   [output]      out_dir
//
// Every key is optional; see RunConfig for defaults. Lists are comma
// separated; snr_db also accepts `start:step:stop`.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "slp/channel_sim.hpp"
#include "slp/errors.hpp"
#include "slp/precoder.hpp"

namespace slp {

struct RunConfig {
  SimConfig sim;
  long long complexity_samples = 2000;
  std::string out_dir = "results";
  /// Where the seed came from: "default", "env", "config" or "flag".
  std::string seed_source = "default";
};

/// Command-line overrides; unset members leave the file value alone.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> precoders;
  std::optional<std::string> snr;
  std::optional<std::string> scheme;
  std::optional<std::string> rho_convention;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError(field + ": expected a number, got '" + text + "'");
  return v;
}

inline long long parse_int(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  // Accept integral values written in scientific notation (2e6).
  if (t.find_first_of("eE.") != std::string::npos) {
    const double d = parse_double(field, t);
    if (d != std::floor(d) || std::abs(d) > 9e18)
      throw ConfigError(field + ": expected an integer, got '" + text + "'");
    return static_cast<long long>(d);
  }
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(field + ": expected an integer, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_seed(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(field + ": expected an unsigned 64-bit integer, got '" + text + "'");
  return v;
}

}  // namespace detail

/// "0,5,10" or "0:5:40" (inclusive).
inline std::vector<double> parse_snr_grid(const std::string& field, const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw ConfigError(field + ": range must be start:step:stop");
    const double a = detail::parse_double(field, parts[0]);
    const double step = detail::parse_double(field, parts[1]);
    const double b = detail::parse_double(field, parts[2]);
    if (!(step > 0.0) || b < a) throw ConfigError(field + ": range needs step > 0 and stop >= start");
    const auto n = static_cast<long long>(std::floor((b - a) / step + 1e-9));
    if (n > 10000) throw ConfigError(field + ": too many SNR points");
    for (long long i = 0; i <= n; ++i) out.push_back(a + step * static_cast<double>(i));
  } else {
    for (const auto& item : detail::split_list(text)) out.push_back(detail::parse_double(field, item));
  }
  if (out.empty()) throw ConfigError(field + ": SNR grid is empty");
  return out;
}

inline std::vector<PrecoderKind> parse_precoder_list(const std::string& field, const std::string& text) {
  std::vector<PrecoderKind> out;
  for (const auto& item : detail::split_list(text)) {
    try {
      out.push_back(parse_precoder(item));
    } catch (const ConfigError& e) {
      throw ConfigError(field + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError(field + ": no precoders listed");
  return out;
}

inline void apply_overrides(RunConfig& rc, const Overrides& o) {
  if (o.seed) {
    rc.sim.seed = *o.seed;
    rc.seed_source = "flag";
  }
  if (o.threads) rc.sim.threads = *o.threads;
  if (o.out_dir) rc.out_dir = *o.out_dir;
  if (o.precoders) rc.sim.precoders = parse_precoder_list("--precoders", *o.precoders);
  if (o.snr) rc.sim.snr_grid_db = parse_snr_grid("--snr", *o.snr);
  if (o.scheme) {
    try {
      rc.sim.scheme = parse_scheme(*o.scheme);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--scheme: ") + e.what());
    }
  }
  if (o.rho_convention) {
    try {
      rc.sim.rho_convention = parse_rho_convention(*o.rho_convention);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--rho-convention: ") + e.what());
    }
  }
}

/// Parses config text; `env_seed` is the SLP_SEED fallback when no seed key is present.
inline RunConfig parse_config(std::istream& in, std::optional<std::string> env_seed = std::nullopt) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  static const std::vector<std::pair<std::string, std::vector<std::string>>> known{
      {"system", {"N", "K", "scheme", "psk_offset", "P_T"}},
      {"precoder", {"kinds", "rho_convention", "omega"}},
      {"simulation",
       {"snr_db", "block_length", "min_symbol_errors", "min_symbols", "max_symbols", "seed", "threads"}},
      {"complexity", {"samples"}},
      {"output", {"out_dir"}},
  };
  for (const auto& [section, body] : tree) {
    const auto it = std::find_if(known.begin(), known.end(), [&](const auto& k) { return k.first == section; });
    if (it == known.end()) throw ConfigError("config: unknown section [" + section + "]");
    if (body.empty() && !body.data().empty())
      throw ConfigError("config: key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ConfigError("config: unknown key [" + section + "] " + key);
    }
  }

  RunConfig rc;
  SimConfig& c = rc.sim;
  const auto get = [&](const std::string& section, const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(section + "/" + key, '/')))
      return detail::trim(*v);
    return std::nullopt;
  };
  const auto field = [](const std::string& section, const std::string& key) {
    return "[" + section + "] " + key;
  };

  if (auto v = get("system", "N")) c.N = static_cast<int>(detail::parse_int(field("system", "N"), *v));
  if (auto v = get("system", "K")) c.K = static_cast<int>(detail::parse_int(field("system", "K"), *v));
  if (auto v = get("system", "scheme")) {
    try {
      c.scheme = parse_scheme(*v);
    } catch (const ConfigError& e) {
      throw ConfigError(field("system", "scheme") + ": " + e.what());
    }
  }
  if (auto v = get("system", "psk_offset")) {
    if (c.scheme.kind != ModulationKind::PSK)
      throw ConfigError(field("system", "psk_offset") + ": only valid for PSK schemes");
    c.scheme.phase_offset = detail::parse_double(field("system", "psk_offset"), *v);
  }
  if (auto v = get("system", "P_T")) c.P_T = detail::parse_double(field("system", "P_T"), *v);

  if (auto v = get("precoder", "kinds")) c.precoders = parse_precoder_list(field("precoder", "kinds"), *v);
  if (auto v = get("precoder", "rho_convention")) {
    try {
      c.rho_convention = parse_rho_convention(*v);
    } catch (const ConfigError& e) {
      throw ConfigError(field("precoder", "rho_convention") + ": " + e.what());
    }
  }
  if (auto v = get("precoder", "omega")) {
    c.omega.clear();
    for (const auto& item : detail::split_list(*v))
      c.omega.push_back(detail::parse_double(field("precoder", "omega"), item));
  }

  if (auto v = get("simulation", "snr_db")) c.snr_grid_db = parse_snr_grid(field("simulation", "snr_db"), *v);
  if (auto v = get("simulation", "block_length"))
    c.block_length = static_cast<int>(detail::parse_int(field("simulation", "block_length"), *v));
  if (auto v = get("simulation", "min_symbol_errors"))
    c.min_symbol_errors = detail::parse_int(field("simulation", "min_symbol_errors"), *v);
  if (auto v = get("simulation", "min_symbols"))
    c.min_symbols = detail::parse_int(field("simulation", "min_symbols"), *v);
  if (auto v = get("simulation", "max_symbols"))
    c.max_symbols = detail::parse_int(field("simulation", "max_symbols"), *v);
  if (auto v = get("simulation", "threads"))
    c.threads = static_cast<int>(detail::parse_int(field("simulation", "threads"), *v));
  if (auto v = get("simulation", "seed")) {
    c.seed = detail::parse_seed(field("simulation", "seed"), *v);
    rc.seed_source = "config";
  } else if (env_seed && !env_seed->empty()) {
    c.seed = detail::parse_seed("SLP_SEED", *env_seed);
    rc.seed_source = "env";
  }

  if (auto v = get("complexity", "samples"))
    rc.complexity_samples = detail::parse_int(field("complexity", "samples"), *v);
  if (auto v = get("output", "out_dir")) rc.out_dir = *v;
  return rc;
}

/// Field-named validation of a fully resolved config.
inline void validate(const RunConfig& rc) {
  try {
    validate(rc.sim);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (rc.complexity_samples < 1) throw ConfigError("config: [complexity] samples must be >= 1");
  if (rc.out_dir.empty()) throw ConfigError("config: [output] out_dir must not be empty");
}

/// Canonical text form of a resolved config; identical configs give identical text.
inline std::string canonical_config(const RunConfig& rc) {
  const auto num = [](double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  const SimConfig& c = rc.sim;
  std::ostringstream os;
  os << "[system]\nN = " << c.N << "\nK = " << c.K << "\nscheme = " << scheme_name(c.scheme) << '\n';
  if (c.scheme.kind == ModulationKind::PSK) os << "psk_offset = " << num(c.scheme.psk_offset()) << '\n';
  os << "P_T = " << num(c.P_T) << "\n\n[precoder]\nkinds = ";
  for (std::size_t i = 0; i < c.precoders.size(); ++i)
    os << (i ? ", " : "") << precoder_name(c.precoders[i]);
  os << "\nrho_convention = " << rho_convention_name(c.rho_convention) << '\n';
  if (!c.omega.empty()) {
    os << "omega = ";
    for (std::size_t i = 0; i < c.omega.size(); ++i) os << (i ? ", " : "") << num(c.omega[i]);
    os << '\n';
  }
  os << "\n[simulation]\nsnr_db = ";
  for (std::size_t i = 0; i < c.snr_grid_db.size(); ++i) os << (i ? ", " : "") << num(c.snr_grid_db[i]);
  os << "\nblock_length = " << c.block_length << "\nmin_symbol_errors = " << c.min_symbol_errors
     << "\nmin_symbols = " << c.min_symbols << "\nmax_symbols = " << c.max_symbols
     << "\nseed = " << c.seed << "\n\n[complexity]\nsamples = " << rc.complexity_samples << '\n';
  return os.str();
}

}  // namespace slp
