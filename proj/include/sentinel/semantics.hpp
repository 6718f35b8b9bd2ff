#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sentinel/domain.hpp"

// Centroid-based normalization of free-text stage-III descriptions: embed,
// score against a labeled prototype bank by cosine similarity, abstain to
// Benign below tau_c. Centroids drift toward accepted observations via EMA.

namespace sentinel::semantics {

using Embedding = std::vector<double>;

double norm(const Embedding& v);

// Throws Errc::zero_vector on (near-)zero input.
Embedding normalized(const Embedding& v);

// dot(a,b) / (|a||b|). Throws Errc::dimension_mismatch, Errc::zero_vector.
double cosine_similarity(const Embedding& a, const Embedding& b);

struct PrototypeBank {
  std::map<AnomalyLabel, Embedding> centroids;       // unit-norm
  std::map<AnomalyLabel, std::size_t> exemplar_counts;
  double ema_alpha = 0.1;

  // >= 2 labels, all unit-norm, Benign never present.
  void validate() const;
};

// mu_k = normalize(mean(exemplars)). Throws Errc::empty_class when a label
// has no exemplars, Errc::zero_mean when they cancel exactly.
PrototypeBank build_bank(
    const std::map<AnomalyLabel, std::vector<Embedding>>& exemplars,
    double ema_alpha = 0.1);

// Description -> vector. Unknown strings fall back to a seeded hash-derived
// unit vector so the pipeline stays total without a real embedding model.
struct EmbeddingFixture {
  int dim = 16;
  std::map<std::string, Embedding> entries;
  std::uint64_t fallback_seed = 0;

  Embedding embed(const std::string& text) const;
};

struct Classification {
  AnomalyLabel label;
  double confidence = 0.0;

  bool operator==(const Classification&) const = default;
};

// argmax_k cos(E(text), mu_k); accepted when max >= tau_c, else Benign.
// Ties break toward the lexicographically smallest label name.
Classification classify(const std::string& text, const EmbeddingFixture& fixture,
                        const PrototypeBank& bank, double tau_c);

// Scores a pre-normalized query against the bank (classify minus embedding).
Classification classify_embedding(const Embedding& query, const PrototypeBank& bank,
                                  double tau_c);

// Copy-on-write EMA step: mu_k <- normalize((1-alpha) mu_k + alpha q_hat).
PrototypeBank ema_update(const PrototypeBank& bank, const AnomalyLabel& label,
                         const Embedding& observation);

// For each tau, the fraction of scored confidences >= tau; rows sorted by
// tau. An empty scored list yields fraction 0 everywhere.
std::vector<std::pair<double, double>> acceptance_sweep(
    const std::vector<Classification>& scored, std::vector<double> taus);

// On-disk document bundling a bank with its text fixtures:
// {"dim": d, "centroids": {label: [..]}, "fixtures": {text: [..]}, "ema_alpha": a}
struct BankDocument {
  int dim = 16;
  PrototypeBank bank;
  EmbeddingFixture fixture;
};

nlohmann::json save_bank_document(const BankDocument& doc);
BankDocument load_bank_document(const nlohmann::json& j);

}  // namespace sentinel::semantics
