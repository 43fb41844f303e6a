#pragma once

// Output artifacts of a run: per-precoder SER CSVs, a detail CSV, a plotting
// script, complexity tables and a JSON manifest. CSV and script contents depend
// only on the resolved config, never on wall-clock time or thread count.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slp/channel_sim.hpp"
#include "slp/config.hpp"
#include "slp/errors.hpp"

namespace slp {

inline constexpr const char* kSerCsvHeader = "snr_db,symbols,errors,ser,ci_halfwidth";

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// 64-bit FNV-1a of the canonical config, as 16 hex digits.
inline std::string run_id(const RunConfig& rc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(rc)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string ser_csv_name(PrecoderKind kind) { return "ser_" + std::string(precoder_name(kind)) + ".csv"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

/// One comment line, the header, then one row per SNR point.
inline std::string ser_csv(const SerCurve& curve, const std::string& id) {
  std::ostringstream os;
  os << "# run_id=" << id << " manifest=manifest.json precoder=" << precoder_name(curve.kind) << '\n'
     << kSerCsvHeader << '\n';
  for (const auto& p : curve.points)
    os << format_double(p.snr_db) << ',' << p.symbols << ',' << p.errors << ',' << format_double(p.ser())
       << ',' << format_double(p.ci_halfwidth()) << '\n';
  return os.str();
}

inline std::string ser_detail_csv(const std::vector<SerCurve>& curves, const std::string& id) {
  std::ostringstream os;
  os << "# run_id=" << id << " manifest=manifest.json\n"
     << "precoder,snr_db,symbols,errors,ser,bits,bit_errors,ber,blocks,failures,cir_violations\n";
  for (const auto& c : curves)
    for (const auto& p : c.points)
      os << precoder_name(c.kind) << ',' << format_double(p.snr_db) << ',' << p.symbols << ',' << p.errors
         << ',' << format_double(p.ser()) << ',' << p.bits << ',' << p.bit_errors << ','
         << format_double(p.ber()) << ',' << p.blocks << ',' << p.failures << ',' << p.cir_violations
         << '\n';
  return os.str();
}

inline std::string plot_script(const std::vector<SerCurve>& curves, const RunConfig& rc) {
  std::ostringstream os;
  os << "#!/usr/bin/env python3\n"
        "# Plots the SER curves written next to this script.\n"
        "import csv\nimport pathlib\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\n"
        "import matplotlib.pyplot as plt\n\nHERE = pathlib.Path(__file__).resolve().parent\nFILES = [";
  for (std::size_t i = 0; i < curves.size(); ++i)
    os << (i ? ", " : "") << '"' << ser_csv_name(curves[i].kind) << '"';
  os << "]\n\n\ndef load(path):\n"
        "    rows = [r for r in csv.reader(path.open()) if r and not r[0].startswith(\"#\")]\n"
        "    head, body = rows[0], rows[1:]\n"
        "    col = {name: i for i, name in enumerate(head)}\n"
        "    snr = [float(r[col[\"snr_db\"]]) for r in body]\n"
        "    ser = [float(r[col[\"ser\"]]) for r in body]\n"
        "    return snr, ser\n\n\n"
        "fig, ax = plt.subplots(figsize=(6, 4.5))\n"
        "for name in FILES:\n"
        "    snr, ser = load(HERE / name)\n"
        "    pts = [(a, b) for a, b in zip(snr, ser) if b > 0]\n"
        "    if pts:\n"
        "        ax.semilogy(*zip(*pts), marker=\"o\", label=name[4:-4])\n"
        "ax.set_xlabel(\"SNR (dB)\")\nax.set_ylabel(\"SER\")\n"
        "ax.set_title(\"N = "
     << rc.sim.N << ", K = " << rc.sim.K << ", " << scheme_name(rc.sim.scheme) << ", L = " << rc.sim.block_length
     << "\")\n"
        "ax.grid(True, which=\"both\", alpha=0.3)\nax.legend()\nfig.tight_layout()\n"
        "fig.savefig(HERE / \"ser.png\", dpi=150)\n";
  return os.str();
}

inline std::string complexity_csv(const OpCountReport& r, const std::string& id) {
  std::ostringstream os;
  os << "# run_id=" << id << " manifest=manifest.json\n"
     << "precoder,mean_k_t,mean_loops,mults_over_n_m\n"
     << "ci_wmmse_lc," << format_double(r.mean_k_t) << ',' << format_double(r.mean_loops_ci_wmmse_lc) << ','
     << format_double(r.ratio_ci_wmmse_lc) << '\n'
     << "ci_zf," << format_double(2.0 * r.K) << ',' << format_double(r.mean_loops_ci_zf) << ','
     << format_double(r.ratio_ci_zf) << '\n'
     << "ci_zf_lc," << format_double(r.mean_k_t) << ',' << format_double(r.mean_loops_ci_zf_lc) << ','
     << format_double(r.ratio_ci_zf_lc) << '\n';
  return os.str();
}

inline std::string complexity_summary(const OpCountReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "N = " << r.N << ", K = " << r.K << ", " << scheme_name(r.scheme) << ", " << r.samples
     << " samples\n"
     << "unit N_M = 8 N K^2 = " << std::setprecision(0) << r.n_m << std::setprecision(3) << " multiplications\n"
     << "mean K_T = " << r.mean_k_t << " of " << 2 * r.K << " (" << r.mean_k_t / (2.0 * r.K) * 100.0
     << "%)\n\n"
     << "precoder      loops    E{M}/N_M\n"
     << "ci_wmmse_lc   " << std::setw(6) << r.mean_loops_ci_wmmse_lc << "   " << r.ratio_ci_wmmse_lc << '\n'
     << "ci_zf         " << std::setw(6) << r.mean_loops_ci_zf << "   " << r.ratio_ci_zf << '\n'
     << "ci_zf_lc      " << std::setw(6) << r.mean_loops_ci_zf_lc << "   " << r.ratio_ci_zf_lc << '\n';
  return os.str();
}

inline nlohmann::json config_json(const RunConfig& rc) {
  const SimConfig& c = rc.sim;
  nlohmann::json j;
  j["N"] = c.N;
  j["K"] = c.K;
  j["scheme"] = scheme_name(c.scheme);
  if (c.scheme.kind == ModulationKind::PSK) j["psk_offset"] = c.scheme.psk_offset();
  j["P_T"] = c.P_T;
  std::vector<std::string> kinds;
  for (auto k : c.precoders) kinds.emplace_back(precoder_name(k));
  j["precoders"] = kinds;
  j["rho_convention"] = std::string(rho_convention_name(c.rho_convention));
  j["omega"] = c.omega;
  j["snr_db"] = c.snr_grid_db;
  j["block_length"] = c.block_length;
  j["min_symbol_errors"] = c.min_symbol_errors;
  j["min_symbols"] = c.min_symbols;
  j["max_symbols"] = c.max_symbols;
  j["threads"] = c.threads;
  j["complexity_samples"] = rc.complexity_samples;
  j["out_dir"] = rc.out_dir;
  return j;
}

inline std::string manifest_json(const RunConfig& rc, const std::string& command, const std::string& version,
                                 const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["tool"] = "slp_cli";
  j["version"] = version;
  j["command"] = command;
  j["run_id"] = run_id(rc);
  j["seed"] = rc.sim.seed;
  j["seed_source"] = rc.seed_source;
  j["timestamp_utc"] = utc_timestamp();
  j["config"] = config_json(rc);
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

/// Writes all SER artifacts into rc.out_dir and returns the file names written.
inline std::vector<std::string> write_ser_outputs(const std::vector<SerCurve>& curves, const RunConfig& rc,
                                                  const std::string& version) {
  namespace fs = std::filesystem;
  const fs::path dir(rc.out_dir);
  fs::create_directories(dir);
  const std::string id = run_id(rc);
  std::vector<std::string> files;
  for (const auto& c : curves) {
    files.push_back(ser_csv_name(c.kind));
    write_text(dir / files.back(), ser_csv(c, id));
  }
  files.emplace_back("ser_details.csv");
  write_text(dir / files.back(), ser_detail_csv(curves, id));
  files.emplace_back("plot_ser.py");
  write_text(dir / files.back(), plot_script(curves, rc));
  write_text(dir / "manifest.json", manifest_json(rc, "ser", version, files));
  return files;
}

inline std::vector<std::string> write_complexity_outputs(const OpCountReport& r, const RunConfig& rc,
                                                         const std::string& version) {
  namespace fs = std::filesystem;
  const fs::path dir(rc.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> files{"complexity.csv", "complexity.txt"};
  write_text(dir / files[0], complexity_csv(r, run_id(rc)));
  write_text(dir / files[1], complexity_summary(r));
  write_text(dir / "manifest.json", manifest_json(rc, "complexity", version, files));
  return files;
}

}  // namespace slp
