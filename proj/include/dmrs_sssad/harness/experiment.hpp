#pragma once

// End-to-end scenarios used by the CLI subcommands and the acceptance runner.

#include "dmrs_sssad/harness/config.hpp"
#include "dmrs_sssad/harness/report.hpp"
#include "dmrs_sssad/harness/roc.hpp"
#include "dmrs_sssad/harness/trials.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace dmrs::harness {

inline constexpr Detector kAllDetectors[] = {Detector::Sssad, Detector::Sd, Detector::Ed};

struct SimulationResult {
  std::vector<TrialOutcome> outcomes;
  RunSummary summary;

  const RocCurve& curve(Detector d) const {
    for (const auto& c : summary.curves) {
      if (c.detector == detector_name(d)) return c;
    }
    throw InsufficientDataError(std::string("no curve for ") + detector_name(d));
  }
  double auc(Detector d) const { return curve(d).auc; }
  double difference_se(Detector a, Detector b) const {
    return summary.extra.at("auc_difference_se").at(std::string(detector_name(a)) + "-" + detector_name(b)).get<double>();
  }

  std::vector<json> trial_log() const {
    std::vector<json> log;
    log.reserve(outcomes.size());
    for (const auto& o : outcomes) log.push_back(to_json(o, summary.config.eta));
    return log;
  }
};

inline int count_ok(const std::vector<TrialOutcome>& outcomes) {
  int ok = 0;
  for (const auto& o : outcomes) ok += o.ok ? 1 : 0;
  return ok;
}

inline SimulationResult simulate_scenario(const ScenarioConfig& cfg, int bootstrap_resamples = 200) {
  const auto start = std::chrono::steady_clock::now();
  const RunInputs in(cfg);
  SimulationResult r;
  r.outcomes = run_trials(in, true);
  r.summary.config = cfg;
  const std::string hash = config_hash(cfg);
  for (Detector d : kAllDetectors) r.summary.curves.push_back(roc_from_outcomes(r.outcomes, d, hash));
  json se = json::object();
  const std::pair<Detector, Detector> pairs[] = {
      {Detector::Sssad, Detector::Sd}, {Detector::Sd, Detector::Ed}, {Detector::Sssad, Detector::Ed}};
  for (const auto& [a, b] : pairs) {
    se[std::string(detector_name(a)) + "-" + detector_name(b)] =
        bootstrap_auc_difference_se(r.outcomes, a, b, bootstrap_resamples, derive_seed(cfg.seed, 0xB007));
  }
  r.summary.extra["auc_difference_se"] = se;
  r.summary.trials_ok = count_ok(r.outcomes);
  r.summary.trials_failed = static_cast<int>(r.outcomes.size()) - r.summary.trials_ok;
  r.summary.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct CalibrationResult {
  Calibration calibration;
  std::vector<TrialOutcome> outcomes;
  double eta = kDefaultEta;
  double target_pfa = 0.05;
  double wall_time_s = 0.0;

  json to_json() const {
    json cdf = json::array();
    const auto& c = calibration.similarities;
    for (std::size_t i = 0; i < c.size(); ++i) {
      cdf.push_back({{"c", c[i]}, {"cdf", static_cast<double>(i + 1) / static_cast<double>(c.size())}});
    }
    return {{"schema_version", kSchemaVersion},
            {"subframe_pairs", c.size()},
            {"eta", eta},
            {"fraction_above_eta", calibration.fraction_above(eta)},
            {"target_pfa", target_pfa},
            {"suggested_eta", calibration.suggested_eta(target_pfa)},
            {"cdf", cdf},
            {"wall_time_s", wall_time_s}};
  }
};

inline CalibrationResult calibrate_scenario(const ScenarioConfig& cfg, double target_pfa = 0.05) {
  const auto start = std::chrono::steady_clock::now();
  const RunInputs in(cfg);
  CalibrationResult r;
  r.outcomes = run_trials(in, false);
  r.calibration = calibrate(r.outcomes);
  r.eta = cfg.eta;
  r.target_pfa = target_pfa;
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct LatencyResult {
  std::vector<StreamOutcome> outcomes;
  LatencySummary summary;
  double wall_time_s = 0.0;

  json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"streams", summary.streams},
            {"onset", summary.onset},
            {"median_first_alarm", summary.median_first_alarm},
            {"pre_onset_alarm_rate", summary.pre_onset_alarm_rate},
            {"streams_without_alarm", summary.streams_without_alarm},
            {"wall_time_s", wall_time_s}};
  }
};

inline LatencyResult latency_scenario(const ScenarioConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const RunInputs in(cfg);
  LatencyResult r;
  r.outcomes = run_streams(in);
  r.summary = summarize_latency(r.outcomes, cfg.change_point);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct SweepCell {
  double snr_db = 0.0;
  int rb = 0;
  SimulationResult result;
};

inline std::vector<SweepCell> sweep_scenarios(const ScenarioConfig& base, const std::vector<double>& snrs,
                                              const std::vector<int>& rbs) {
  std::vector<SweepCell> cells;
  for (double snr : snrs) {
    for (int rb : rbs) {
      ScenarioConfig cfg = base;
      cfg.snr_db = snr;
      cfg.rb = rb;
      cells.push_back({snr, rb, simulate_scenario(cfg)});
    }
  }
  return cells;
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string s = "snr_db,rb,samples,auc_sssad,auc_sd,auc_ed,trials_ok\n";
  for (const auto& c : cells) {
    s += format_number(c.snr_db) + "," + std::to_string(c.rb) + "," + std::to_string(c.result.summary.config.samples()) +
         "," + format_number(c.result.auc(Detector::Sssad)) + "," + format_number(c.result.auc(Detector::Sd)) + "," +
         format_number(c.result.auc(Detector::Ed)) + "," + std::to_string(c.result.summary.trials_ok) + "\n";
  }
  return s;
}

}  // namespace dmrs::harness
