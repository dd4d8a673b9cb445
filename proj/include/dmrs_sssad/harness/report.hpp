#pragma once

// Result files and JSON records. Numbers are written with round-trip
// precision and no locale dependence, so equal runs give equal bytes.

#include "dmrs_sssad/harness/config.hpp"
#include "dmrs_sssad/harness/roc.hpp"
#include "dmrs_sssad/harness/trials.hpp"
#include "dmrs_sssad/phy_link.hpp"
#include "dmrs_sssad/sparsity_extractor.hpp"
#include "dmrs_sssad/sssad_detector.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace dmrs::harness {

inline constexpr const char* kSchemaVersion = "1.0";

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- records ----------------------------------------------------------------

inline json complex_matrix_to_json(const ComplexMat& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    json rc = json::array(), ic = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      rc.push_back(m(r, c).real());
      ic.push_back(m(r, c).imag());
    }
    re.push_back(std::move(rc));
    im.push_back(std::move(ic));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

inline ComplexMat complex_matrix_from_json(const json& j) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (static_cast<Eigen::Index>(re.size()) != cols || static_cast<Eigen::Index>(im.size()) != cols) {
      throw ShapeError("complex matrix: column count mismatch");
    }
    ComplexMat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& rc = re.at(static_cast<std::size_t>(c));
      const auto& ic = im.at(static_cast<std::size_t>(c));
      if (static_cast<Eigen::Index>(rc.size()) != rows || static_cast<Eigen::Index>(ic.size()) != rows) {
        throw ShapeError("complex matrix: row count mismatch");
      }
      for (Eigen::Index r = 0; r < rows; ++r) {
        m(r, c) = {rc.at(static_cast<std::size_t>(r)).get<double>(), ic.at(static_cast<std::size_t>(r)).get<double>()};
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw ShapeError(std::string("complex matrix: ") + e.what());
  }
}

/// Column-per-sample dump of a stacked estimate window (antenna-major rows).
inline json to_json(const StackedEstimate& e) {
  return {{"subframe", e.subframe}, {"taps", e.taps}, {"antennas", e.antennas},
          {"samples", complex_matrix_to_json(e.samples)}};
}

inline StackedEstimate stacked_estimate_from_json(const json& j) {
  StackedEstimate e;
  try {
    e.subframe = j.at("subframe").get<int>();
    e.taps = j.at("taps").get<int>();
    e.antennas = j.at("antennas").get<int>();
  } catch (const json::exception& ex) {
    throw ShapeError(std::string("stacked estimate: ") + ex.what());
  }
  e.samples = complex_matrix_from_json(j.at("samples"));
  if (e.samples.rows() != e.dimension()) throw ShapeError("stacked estimate: row count differs from taps * antennas");
  return e;
}

/// Fingerprint record with the non-zero coordinates only.
inline json to_json(const SparsityFingerprint& f) {
  json entries = json::array();
  for (int i : f.support) {
    const cplx v = f.phi(i);
    entries.push_back({{"index", i}, {"re", v.real()}, {"im", v.imag()}});
  }
  const auto& d = f.diagnostics;
  return {{"subframe", f.subframe},
          {"dimension", f.phi.size()},
          {"support_size", f.support.size()},
          {"entries", entries},
          {"diagnostics",
           {{"initial_loss", d.initial_loss},
            {"final_loss", d.final_loss},
            {"iterations", d.iterations},
            {"initial_support", d.initial_support},
            {"support_fallback", d.support_fallback},
            {"init_fallback", d.init_fallback}}}};
}

inline SparsityFingerprint fingerprint_from_json(const json& j) {
  SparsityFingerprint f;
  try {
    f.subframe = j.at("subframe").get<int>();
    f.phi = ComplexVec::Zero(j.at("dimension").get<Eigen::Index>());
    for (const auto& e : j.at("entries")) {
      const int i = e.at("index").get<int>();
      if (i < 0 || i >= f.phi.size()) throw ShapeError("fingerprint: index out of range");
      f.phi(i) = {e.at("re").get<double>(), e.at("im").get<double>()};
    }
  } catch (const json::exception& ex) {
    throw ShapeError(std::string("fingerprint: ") + ex.what());
  }
  f.support = SparsityFingerprint::support_of(f.phi);
  return f;
}

inline json to_json(const DetectionOutcome& o) {
  return {{"subframe", o.subframe},
          {"similarity", o.similarity},
          {"decision", to_string(o.decision)},
          {"reference_subframe", o.reference_subframe}};
}

inline json to_json(const TrialOutcome& o, double eta) {
  json j = {{"trial", o.trial}, {"ok", o.ok}};
  if (!o.ok) {
    j["error"] = o.error;
    return j;
  }
  j["victim_azimuth_deg"] = o.victim_azimuth_deg;
  j["attacker_azimuth_deg"] = o.attacker_azimuth_deg;
  j["absent"] = {{"c", o.c_absent},
                 {"decision", o.c_absent < eta ? "spoofing" : "normal"},
                 {"ed", o.ed_absent},
                 {"sd", o.sd_absent},
                 {"support", o.support_absent}};
  if (o.has_present) {
    j["present"] = {{"c", o.c_present},
                    {"decision", o.c_present < eta ? "spoofing" : "normal"},
                    {"ed", o.ed_present},
                    {"sd", o.sd_present},
                    {"support", o.support_present}};
  }
  j["support_reference"] = o.support_reference;
  return j;
}

inline json to_json(const StreamOutcome& o) {
  json j = {{"trial", o.trial}, {"ok", o.ok}};
  if (!o.ok) {
    j["error"] = o.error;
    return j;
  }
  j["first_alarm"] = o.first_alarm ? json(*o.first_alarm) : json(nullptr);
  j["pre_onset_alarms"] = o.pre_onset_alarms;
  j["pre_onset_comparisons"] = o.pre_onset_comparisons;
  j["similarities"] = o.similarities;
  return j;
}

// --- files ------------------------------------------------------------------

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return std::filesystem::path(dir);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string roc_csv(const RocCurve& curve) {
  std::string s = "p_fa,p_d,threshold,n_attack,n_normal\n";
  for (const auto& p : curve.points) {
    s += format_number(p.p_fa) + "," + format_number(p.p_d) + "," + format_number(p.threshold) + "," +
         std::to_string(p.n_attack) + "," + std::to_string(p.n_normal) + "\n";
  }
  return s;
}

struct RunSummary {
  ScenarioConfig config;
  std::vector<RocCurve> curves;
  json extra = json::object();  // bootstrap errors, calibration, latency, ...
  int trials_ok = 0;
  int trials_failed = 0;
  double wall_time_s = 0.0;
};

inline json summary_json(const RunSummary& s) {
  json aucs = json::object();
  for (const auto& c : s.curves) aucs[c.detector] = c.auc;
  json j = {{"schema_version", kSchemaVersion},
            {"config_hash", config_hash(s.config)},
            {"seed", s.config.seed},
            {"trials", s.config.trials},
            {"trials_ok", s.trials_ok},
            {"trials_failed", s.trials_failed},
            {"samples_per_subframe", s.config.samples()},
            {"auc", aucs},
            {"config", to_json(s.config)},
            {"wall_time_s", s.wall_time_s}};
  for (const auto& item : s.extra.items()) j[item.key()] = item.value();
  return j;
}

/// roc_<detector>.csv per curve, summary.json, and trials.jsonl when a
/// per-trial log is given.
inline void emit_results(const RunSummary& summary, const std::vector<json>& trial_log, const std::string& dir) {
  const auto root = ensure_dir(dir);
  for (const auto& c : summary.curves) write_text(root / ("roc_" + c.detector + ".csv"), roc_csv(c));
  write_text(root / "summary.json", summary_json(summary).dump(2) + "\n");
  if (!trial_log.empty()) {
    std::string lines;
    for (const auto& j : trial_log) lines += j.dump() + "\n";
    write_text(root / "trials.jsonl", lines);
  }
}

}  // namespace dmrs::harness
