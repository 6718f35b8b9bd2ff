#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "sentinel/domain.hpp"
#include "sentinel/semantics.hpp"

// Three-stage early-exit pipeline: object-level detection, reconstruction
// scoring, semantic reasoning. A frame stops at the first stage whose
// confidence clears its threshold; alarm context forces the full sweep and
// keeps the earlier verdicts as evidence.

namespace sentinel::cascade {

struct StageOutcome {
  double confidence = 0.0;  // [0,1] for stages I/III, raw error for stage II
  AnomalyLabel label;
  std::string detail;
  double latency = 0.0;  // simulated seconds
};

// Stage backends are stateless: evaluate() must be a pure function of the
// frame (identity, tag) and the backend's fixed configuration, so identical
// inputs always give identical outputs and evaluations can run concurrently.
class StageBackend {
 public:
  virtual ~StageBackend() = default;
  virtual StageOutcome evaluate(const Frame& frame) const = 0;
};

struct ReconstructionPair {
  Frame original;
  Frame reconstruction;

  // Shapes must match and both frames must be valid.
  void validate() const;
};

// Deterministic autoencoder stand-in: box-average downsample by `factor`
// then nearest-neighbor upsample. Fixed point on block-constant frames.
// factor must be one of {2,4,8} and divide both dimensions.
ReconstructionPair reconstruct_proxy(const Frame& frame, int factor);

// Mean over channels*H*W of squared per-pixel differences; in [0,1].
double reconstruction_error(const ReconstructionPair& pair);

struct CascadeStages {
  const StageBackend* object_detection = nullptr;
  const StageBackend* reconstruction = nullptr;
  const StageBackend* semantic = nullptr;
};

struct CascadeOptions {
  bool force_stage3 = false;
  // Opt-in accounting mode: total_latency = max of executed stage latencies
  // instead of their sum. Off by default; the additivity invariant
  // (total == sum of verdict elapsed) holds only for the default mode.
  bool parallel_latency = false;
};

// Routing per the early-exit rule: exit at stage I when conf1 >= tau1, else
// at stage II when e(x) >= tau2, else resolve at stage III. A backend that
// throws is recorded as a zero-confidence verdict and the cascade escalates
// to the next stage (fail-open).
CascadeResult run_cascade(const Frame& frame, const CascadeStages& stages,
                          const Thresholds& t, const CascadeOptions& opts = {});

// --- Synthetic backends ------------------------------------------------------

struct ConfidenceSpec {
  enum class Kind { fixed, beta };
  Kind kind = Kind::fixed;
  double value = 0.0;   // fixed
  double alpha = 1.0;   // beta
  double beta = 1.0;
};

struct LatencySpec {
  double nominal = 0.0;
  double jitter = 0.0;  // uniform +/- jitter, seeded
};

struct ClassProfile {
  ConfidenceSpec confidence;
  AnomalyLabel label;
  std::string detail;
};

// Per-scenario-class behavior of one synthetic stage. Lookup falls back to
// the "default" class; a miss on both throws Errc::unknown_scenario_class.
struct StageProfile {
  std::map<std::string, ClassProfile> classes;
  LatencySpec latency;
  std::uint64_t seed = 0;
};

// Stage I/II stand-in: confidence (or raw error, for stage II profiles) is
// drawn deterministically from (frame identity, profile, seed).
class SyntheticStageBackend : public StageBackend {
 public:
  SyntheticStageBackend(StageProfile profile, std::uint64_t salt);
  StageOutcome evaluate(const Frame& frame) const override;

 private:
  StageProfile profile_;
  std::uint64_t salt_;
};

// Stage II backed by the reconstruction proxy: confidence is the measured
// e(x). The structural label comes from the frame's scenario class (frozen
// streams vs illumination shifts; the proxy cannot tell the causes apart).
class ProxyReconstructionBackend : public StageBackend {
 public:
  ProxyReconstructionBackend(int factor, LatencySpec latency, std::uint64_t seed);
  StageOutcome evaluate(const Frame& frame) const override;

 private:
  int factor_;
  LatencySpec latency_;
  std::uint64_t seed_;
};

// Stage III stand-in. Two modes:
//  - direct: confidence drawn from the class profile; the label abstains to
//    Benign below tau_c.
//  - classifier: the class profile's detail is the generated description; it
//    is embedded via the fixture and scored against the prototype bank.
class SyntheticSemanticBackend : public StageBackend {
 public:
  // direct mode
  SyntheticSemanticBackend(StageProfile profile, double tau_c);
  // classifier mode; fixture/bank are borrowed and must outlive the backend
  SyntheticSemanticBackend(StageProfile profile, double tau_c,
                           const semantics::EmbeddingFixture* fixture,
                           const semantics::PrototypeBank* bank);

  StageOutcome evaluate(const Frame& frame) const override;

  bool classifier_mode() const { return fixture_ != nullptr; }

 private:
  StageProfile profile_;
  double tau_c_;
  const semantics::EmbeddingFixture* fixture_ = nullptr;
  const semantics::PrototypeBank* bank_ = nullptr;
};

// Shared lookup used by the synthetic backends.
const ClassProfile& profile_for_frame(const StageProfile& profile, const Frame& frame);
double draw_confidence(const ConfidenceSpec& spec, std::uint64_t seed);
double draw_latency(const LatencySpec& spec, std::uint64_t seed);
std::uint64_t frame_draw_seed(const StageProfile& profile, std::uint64_t salt,
                              const Frame& frame);

}  // namespace sentinel::cascade
