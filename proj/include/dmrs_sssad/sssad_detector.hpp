#pragma once

// Sequential sparsity-structure anomaly detection over consecutive
// subframe fingerprints.

#include "dmrs_sssad/common.hpp"
#include "dmrs_sssad/sparsity_extractor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dmrs {

/// |<a, b>| / (||a|| ||b||) with the Hermitian inner product.
inline double similarity(const ComplexVec& a, const ComplexVec& b) {
  if (a.size() != b.size()) throw ShapeError("similarity: fingerprint dimensions differ");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInputError("similarity: zero-norm fingerprint");
  return std::min(1.0, std::abs(a.dot(b)) / (na * nb));
}

inline double similarity(const SparsityFingerprint& a, const SparsityFingerprint& b) {
  return similarity(a.phi, b.phi);
}

enum class Decision { Normal, SpoofingAlarm };

inline const char* to_string(Decision d) { return d == Decision::Normal ? "normal" : "spoofing"; }

enum class ReferencePolicy {
  Quarantine,    // keep the last accepted fingerprint while alarmed
  AlwaysUpdate,  // every new fingerprint becomes the reference
};

struct DetectionOutcome {
  int subframe = 0;
  double similarity = 0.0;
  Decision decision = Decision::Normal;
  int reference_subframe = 0;
};

inline constexpr double kDefaultEta = 0.92;

class DetectorState {
 public:
  explicit DetectorState(SparsityFingerprint reference, double eta = kDefaultEta,
                         ReferencePolicy policy = ReferencePolicy::Quarantine)
      : reference_(std::move(reference)), eta_(eta), policy_(policy), last_subframe_(reference_.subframe) {
    if (!(eta_ >= 0.0 && eta_ <= 1.0)) throw ParameterError("detector: eta must lie in [0, 1]");
    if (!(reference_.phi.norm() > 0.0)) throw DegenerateInputError("detector: zero-norm reference fingerprint");
  }

  /// Compare `next` against the reference. Degenerate input leaves the state untouched.
  DetectionOutcome step(const SparsityFingerprint& next) {
    if (next.subframe <= last_subframe_) {
      throw ParameterError("detector: subframe " + std::to_string(next.subframe) + " does not follow " +
                           std::to_string(last_subframe_));
    }
    const double c = similarity(reference_, next);
    DetectionOutcome out{next.subframe, c, c < eta_ ? Decision::SpoofingAlarm : Decision::Normal,
                         reference_.subframe};
    last_subframe_ = next.subframe;
    if (out.decision == Decision::SpoofingAlarm) alarm_latched_ = true;
    if (out.decision == Decision::Normal || policy_ == ReferencePolicy::AlwaysUpdate) reference_ = next;
    history_.push_back(out);
    return out;
  }

  const SparsityFingerprint& reference() const { return reference_; }
  double eta() const { return eta_; }
  ReferencePolicy policy() const { return policy_; }
  bool alarm_latched() const { return alarm_latched_; }
  const std::vector<DetectionOutcome>& history() const { return history_; }

 private:
  SparsityFingerprint reference_;
  double eta_;
  ReferencePolicy policy_;
  int last_subframe_;
  bool alarm_latched_ = false;
  std::vector<DetectionOutcome> history_;
};

struct StreamResult {
  std::vector<DetectionOutcome> outcomes;
  std::optional<int> first_alarm;  // subframe index of the first alarm
};

/// Fold step() over a stream; the first fingerprint seeds the reference.
inline StreamResult run_stream(const std::vector<SparsityFingerprint>& stream, double eta = kDefaultEta,
                               ReferencePolicy policy = ReferencePolicy::Quarantine) {
  if (stream.empty()) throw ParameterError("run_stream: empty fingerprint stream");
  DetectorState state(stream.front(), eta, policy);
  StreamResult result;
  for (std::size_t i = 1; i < stream.size(); ++i) {
    const auto outcome = state.step(stream[i]);
    if (outcome.decision == Decision::SpoofingAlarm && !result.first_alarm) result.first_alarm = outcome.subframe;
  }
  result.outcomes = state.history();
  return result;
}

}  // namespace dmrs
