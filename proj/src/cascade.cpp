#include "sentinel/cascade.hpp"

#include <algorithm>
#include <cmath>

#include "sentinel/rand.hpp"

namespace sentinel::cascade {

void ReconstructionPair::validate() const {
  original.validate();
  reconstruction.validate();
  if (original.width != reconstruction.width ||
      original.height != reconstruction.height ||
      original.channels != reconstruction.channels) {
    raise(Errc::dimension_mismatch, "reconstruction shape differs from original");
  }
}

ReconstructionPair reconstruct_proxy(const Frame& frame, int factor) {
  frame.validate();
  if (factor != 2 && factor != 4 && factor != 8) {
    raise(Errc::shape_not_divisible,
          "factor must be one of {2,4,8}, got " + std::to_string(factor));
  }
  if (frame.width % factor != 0 || frame.height % factor != 0) {
    raise(Errc::shape_not_divisible,
          "frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
              " not divisible by factor " + std::to_string(factor));
  }

  Frame recon = frame;
  const int bw = frame.width / factor;
  const int bh = frame.height / factor;
  const double inv_block = 1.0 / (static_cast<double>(factor) * factor);
  for (int c = 0; c < frame.channels; ++c) {
    for (int by = 0; by < bh; ++by) {
      for (int bx = 0; bx < bw; ++bx) {
        double sum = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            sum += frame.at(bx * factor + dx, by * factor + dy, c);
          }
        }
        const float mean = static_cast<float>(sum * inv_block);
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            recon.at(bx * factor + dx, by * factor + dy, c) = mean;
          }
        }
      }
    }
  }
  return ReconstructionPair{frame, std::move(recon)};
}

double reconstruction_error(const ReconstructionPair& pair) {
  pair.validate();
  const auto& a = pair.original.pixels;
  const auto& b = pair.reconstruction.pixels;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

namespace {

StageOutcome evaluate_guarded(const StageBackend* backend, Stage stage,
                              const Frame& frame, bool& failed) {
  failed = false;
  if (backend == nullptr) {
    failed = true;
    return StageOutcome{0.0, AnomalyLabel(),
                        std::string("backend failure at stage ") + stage_numeral(stage) +
                            ": not configured",
                        0.0};
  }
  try {
    return backend->evaluate(frame);
  } catch (const std::exception& e) {
    failed = true;
    return StageOutcome{0.0, AnomalyLabel(),
                        std::string("backend failure at stage ") + stage_numeral(stage) +
                            ": " + e.what(),
                        0.0};
  }
}

}  // namespace

CascadeResult run_cascade(const Frame& frame, const CascadeStages& stages,
                          const Thresholds& t, const CascadeOptions& opts) {
  CascadeResult result;
  result.frame_ref = FrameRef{frame.camera_id, frame.stream_time};
  result.forced = opts.force_stage3;

  bool failed = false;

  // Stage I: object-level detection.
  StageOutcome s1 = evaluate_guarded(stages.object_detection,
                                     Stage::object_detection, frame, failed);
  const bool exit1 = !failed && s1.confidence >= t.tau1;
  result.verdicts.push_back(StageVerdict{Stage::object_detection, s1.confidence,
                                         s1.label, exit1 && !opts.force_stage3,
                                         s1.latency, s1.detail});
  if (exit1 && !opts.force_stage3) {
    result.final_label = s1.label;
    result.exit_stage = Stage::object_detection;
  } else {
    // Stage II: reconstruction scoring.
    StageOutcome s2 = evaluate_guarded(stages.reconstruction,
                                       Stage::reconstruction, frame, failed);
    const bool exit2 = !failed && s2.confidence >= t.tau2;
    result.verdicts.push_back(StageVerdict{Stage::reconstruction, s2.confidence,
                                           s2.label, exit2 && !opts.force_stage3,
                                           s2.latency, s2.detail});
    if (exit2 && !opts.force_stage3) {
      result.final_label = s2.label;
      result.exit_stage = Stage::reconstruction;
    } else {
      // Stage III: semantic reasoning resolves whatever remains.
      StageOutcome s3 = evaluate_guarded(stages.semantic, Stage::semantic,
                                         frame, failed);
      result.verdicts.push_back(StageVerdict{Stage::semantic, s3.confidence,
                                             s3.label, true, s3.latency,
                                             s3.detail});
      result.final_label = s3.label;
      result.exit_stage = Stage::semantic;
    }
  }

  if (opts.parallel_latency) {
    double longest = 0.0;
    for (const auto& v : result.verdicts) longest = std::max(longest, v.elapsed);
    result.total_latency = longest;
  } else {
    double sum = 0.0;
    for (const auto& v : result.verdicts) sum += v.elapsed;
    result.total_latency = sum;
  }
  return result;
}

// --- Synthetic backends ------------------------------------------------------

const ClassProfile& profile_for_frame(const StageProfile& profile,
                                      const Frame& frame) {
  const std::string cls =
      frame.seed_tag ? frame.seed_tag->scenario_class : std::string("default");
  auto it = profile.classes.find(cls);
  if (it == profile.classes.end()) {
    it = profile.classes.find("default");
  }
  if (it == profile.classes.end()) {
    raise(Errc::unknown_scenario_class,
          "no profile for class '" + cls + "' and no default");
  }
  return it->second;
}

std::uint64_t frame_draw_seed(const StageProfile& profile, std::uint64_t salt,
                              const Frame& frame) {
  std::uint64_t id;
  std::uint64_t cls_hash;
  if (frame.seed_tag) {
    id = frame.seed_tag->draw_id;
    cls_hash = rnd::fnv1a(frame.seed_tag->scenario_class);
  } else {
    id = rnd::combine(rnd::fnv1a(frame.camera_id),
                      static_cast<std::uint64_t>(frame.stream_time));
    cls_hash = rnd::fnv1a("default");
  }
  return rnd::combine(rnd::combine(profile.seed, salt),
                      rnd::combine(cls_hash, id));
}

double draw_confidence(const ConfidenceSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ConfidenceSpec::Kind::fixed:
      return spec.value;
    case ConfidenceSpec::Kind::beta: {
      rnd::Stream stream(seed);
      return rnd::beta_quantile(spec.alpha, spec.beta, stream.next_unit());
    }
  }
  return 0.0;
}

double draw_latency(const LatencySpec& spec, std::uint64_t seed) {
  if (spec.jitter <= 0.0) return spec.nominal;
  rnd::Stream stream(seed);
  return std::max(0.0, spec.nominal + spec.jitter * (2.0 * stream.next_unit() - 1.0));
}

SyntheticStageBackend::SyntheticStageBackend(StageProfile profile, std::uint64_t salt)
    : profile_(std::move(profile)), salt_(salt) {}

StageOutcome SyntheticStageBackend::evaluate(const Frame& frame) const {
  const ClassProfile& cls = profile_for_frame(profile_, frame);
  const std::uint64_t seed = frame_draw_seed(profile_, salt_, frame);
  StageOutcome out;
  out.confidence = draw_confidence(cls.confidence, seed);
  out.label = cls.label;
  out.detail = cls.detail;
  out.latency = draw_latency(profile_.latency, rnd::combine(seed, 0x1a7eull));
  return out;
}

ProxyReconstructionBackend::ProxyReconstructionBackend(int factor,
                                                       LatencySpec latency,
                                                       std::uint64_t seed)
    : factor_(factor), latency_(latency), seed_(seed) {}

StageOutcome ProxyReconstructionBackend::evaluate(const Frame& frame) const {
  const ReconstructionPair pair = reconstruct_proxy(frame, factor_);
  StageOutcome out;
  out.confidence = reconstruction_error(pair);
  const std::string cls =
      frame.seed_tag ? frame.seed_tag->scenario_class : std::string();
  out.label = (cls == "frozen") ? AnomalyLabel(AnomalyLabel::Kind::frozen_stream)
                                : AnomalyLabel(AnomalyLabel::Kind::illumination_shift);
  out.detail = "proxy reconstruction, factor " + std::to_string(factor_);
  std::uint64_t id = frame.seed_tag
                         ? frame.seed_tag->draw_id
                         : rnd::combine(rnd::fnv1a(frame.camera_id),
                                        static_cast<std::uint64_t>(frame.stream_time));
  out.latency = draw_latency(latency_, rnd::combine(seed_, id));
  return out;
}

SyntheticSemanticBackend::SyntheticSemanticBackend(StageProfile profile, double tau_c)
    : profile_(std::move(profile)), tau_c_(tau_c) {}

SyntheticSemanticBackend::SyntheticSemanticBackend(
    StageProfile profile, double tau_c, const semantics::EmbeddingFixture* fixture,
    const semantics::PrototypeBank* bank)
    : profile_(std::move(profile)), tau_c_(tau_c), fixture_(fixture), bank_(bank) {}

StageOutcome SyntheticSemanticBackend::evaluate(const Frame& frame) const {
  const ClassProfile& cls = profile_for_frame(profile_, frame);
  const std::uint64_t seed =
      frame_draw_seed(profile_, static_cast<std::uint64_t>(Stage::semantic), frame);
  StageOutcome out;
  out.detail = cls.detail;
  out.latency = draw_latency(profile_.latency, rnd::combine(seed, 0x1a7eull));
  if (classifier_mode()) {
    const semantics::Classification c =
        semantics::classify(cls.detail, *fixture_, *bank_, tau_c_);
    out.confidence = c.confidence;
    out.label = c.label;
  } else {
    out.confidence = draw_confidence(cls.confidence, seed);
    out.label = out.confidence >= tau_c_ ? cls.label : AnomalyLabel();
  }
  return out;
}

}  // namespace sentinel::cascade
