#include "sentinel/semantics.hpp"

#include <algorithm>
#include <cmath>

#include "sentinel/rand.hpp"

namespace sentinel::semantics {

namespace {
constexpr double kZeroNorm = 1e-300;
constexpr double kUnitNormTol = 1e-9;
}  // namespace

double norm(const Embedding& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Embedding normalized(const Embedding& v) {
  const double n = norm(v);
  if (!(n > kZeroNorm)) {
    raise(Errc::zero_vector, "cannot normalize a zero vector");
  }
  Embedding out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    raise(Errc::dimension_mismatch, "cosine over dims " + std::to_string(a.size()) +
                                        " vs " + std::to_string(b.size()));
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > kZeroNorm) || !(nb > kZeroNorm)) {
    raise(Errc::zero_vector, "cosine undefined for zero vectors");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

void PrototypeBank::validate() const {
  if (centroids.size() < 2) {
    raise(Errc::bound_violation, "prototype bank needs >= 2 labels, has " +
                                     std::to_string(centroids.size()));
  }
  for (const auto& [label, mu] : centroids) {
    if (label.is_benign()) {
      raise(Errc::bound_violation,
            "benign is the abstention outcome, not a bank entry");
    }
    if (std::fabs(norm(mu) - 1.0) > kUnitNormTol) {
      raise(Errc::bound_violation,
            "centroid for '" + label.name() + "' is not unit-norm");
    }
  }
  if (!(ema_alpha > 0.0 && ema_alpha <= 1.0)) {
    raise(Errc::bound_violation, "ema_alpha must be in (0,1]");
  }
}

PrototypeBank build_bank(
    const std::map<AnomalyLabel, std::vector<Embedding>>& exemplars,
    double ema_alpha) {
  PrototypeBank bank;
  bank.ema_alpha = ema_alpha;
  for (const auto& [label, vecs] : exemplars) {
    if (vecs.empty()) {
      raise(Errc::empty_class, "label '" + label.name() + "' has no exemplars");
    }
    Embedding mean(vecs.front().size(), 0.0);
    for (const auto& v : vecs) {
      if (v.size() != mean.size()) {
        raise(Errc::dimension_mismatch,
              "exemplar dimension mismatch for '" + label.name() + "'");
      }
      for (std::size_t i = 0; i < v.size(); ++i) mean[i] += v[i];
    }
    for (double& x : mean) x /= static_cast<double>(vecs.size());
    if (norm(mean) <= kZeroNorm) {
      raise(Errc::zero_mean, "exemplars for '" + label.name() + "' cancel exactly");
    }
    bank.centroids[label] = normalized(mean);
    bank.exemplar_counts[label] = vecs.size();
  }
  bank.validate();
  return bank;
}

Embedding EmbeddingFixture::embed(const std::string& text) const {
  auto it = entries.find(text);
  if (it != entries.end()) return it->second;
  // Seeded fallback: hash the text to a deterministic unit vector.
  rnd::Stream stream(rnd::combine(fallback_seed, text));
  Embedding v(static_cast<std::size_t>(dim));
  for (double& x : v) x = stream.next_gauss();
  return normalized(v);
}

Classification classify_embedding(const Embedding& query, const PrototypeBank& bank,
                                  double tau_c) {
  bank.validate();
  const Embedding q = normalized(query);
  bool have_best = false;
  AnomalyLabel best_label;
  double best = 0.0;
  // Map iteration is in ascending label-name order, so keeping strict '>'
  // breaks ties toward the lexicographically smallest label.
  for (const auto& [label, mu] : bank.centroids) {
    double dot = 0.0;
    if (mu.size() != q.size()) {
      raise(Errc::dimension_mismatch, "query dim " + std::to_string(q.size()) +
                                          " vs centroid dim " +
                                          std::to_string(mu.size()));
    }
    for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * mu[i];
    if (!have_best || dot > best) {
      have_best = true;
      best = dot;
      best_label = label;
    }
  }
  if (best >= tau_c) {
    return {best_label, best};
  }
  return {AnomalyLabel(), best};  // abstain to Benign, confidence = max score
}

Classification classify(const std::string& text, const EmbeddingFixture& fixture,
                        const PrototypeBank& bank, double tau_c) {
  return classify_embedding(fixture.embed(text), bank, tau_c);
}

PrototypeBank ema_update(const PrototypeBank& bank, const AnomalyLabel& label,
                         const Embedding& observation) {
  auto it = bank.centroids.find(label);
  if (it == bank.centroids.end()) {
    raise(Errc::unknown_label, "no centroid for '" + label.name() + "'");
  }
  const Embedding obs = normalized(observation);
  if (obs.size() != it->second.size()) {
    raise(Errc::dimension_mismatch, "observation dim mismatch");
  }
  const double a = bank.ema_alpha;
  Embedding blend(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    blend[i] = (1.0 - a) * it->second[i] + a * obs[i];
  }
  if (norm(blend) <= kZeroNorm) {
    raise(Errc::zero_mean, "EMA blend cancelled exactly for '" + label.name() + "'");
  }
  PrototypeBank next = bank;
  next.centroids[label] = normalized(blend);
  return next;
}

std::vector<std::pair<double, double>> acceptance_sweep(
    const std::vector<Classification>& scored, std::vector<double> taus) {
  for (const auto& s : scored) {
    if (!(s.confidence >= -1.0 && s.confidence <= 1.0)) {
      raise(Errc::bound_violation, "confidence outside [-1,1]");
    }
  }
  std::sort(taus.begin(), taus.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    if (scored.empty()) {
      out.emplace_back(tau, 0.0);
      continue;
    }
    std::size_t accepted = 0;
    for (const auto& s : scored) {
      if (s.confidence >= tau) ++accepted;
    }
    out.emplace_back(tau, static_cast<double>(accepted) /
                              static_cast<double>(scored.size()));
  }
  return out;
}

nlohmann::json save_bank_document(const BankDocument& doc) {
  nlohmann::json centroids = nlohmann::json::object();
  for (const auto& [label, mu] : doc.bank.centroids) {
    centroids[label.name()] = mu;
  }
  nlohmann::json fixtures = nlohmann::json::object();
  for (const auto& [text, v] : doc.fixture.entries) {
    fixtures[text] = v;
  }
  return nlohmann::json{{"dim", doc.dim},
                        {"centroids", centroids},
                        {"fixtures", fixtures},
                        {"ema_alpha", doc.bank.ema_alpha}};
}

BankDocument load_bank_document(const nlohmann::json& j) {
  BankDocument doc;
  doc.dim = j.at("dim").get<int>();
  doc.bank.ema_alpha = j.at("ema_alpha").get<double>();
  for (const auto& [name, arr] : j.at("centroids").items()) {
    const AnomalyLabel label = AnomalyLabel::from_name(name);
    doc.bank.centroids[label] = arr.get<Embedding>();
    doc.bank.exemplar_counts[label] = 1;
  }
  doc.fixture.dim = doc.dim;
  if (j.contains("fixtures")) {
    for (const auto& [text, arr] : j.at("fixtures").items()) {
      doc.fixture.entries[text] = arr.get<Embedding>();
    }
  }
  doc.bank.validate();
  return doc;
}

}  // namespace sentinel::semantics
