#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmk/elements.hpp"
#include "vmk/metrics.hpp"

namespace vmk {

/// Model ids ordered best-first by evaluation score.
struct ModelRanking {
  std::vector<std::string> ids;
};

inline void validate(const ModelRanking& r) {
  if (r.ids.empty()) throw std::invalid_argument("model ranking: empty");
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    for (std::size_t j = i + 1; j < r.ids.size(); ++j) {
      if (r.ids[i] == r.ids[j]) throw std::invalid_argument("model ranking: duplicate id");
    }
  }
}

/// Inverse-Chamfer similarity in (0,1]; different classes never match.
inline double instance_similarity(const MapInstance& a, const MapInstance& b) {
  if (a.cls != b.cls) return 0.0;
  return 1.0 / (1.0 + chamfer(a.geometry, b.geometry));
}

/// Merges ranked model outputs: the best model's instances pass through
/// unchanged; each later model contributes only instances whose similarity to
/// everything accepted so far stays below tau_sim, with scores discounted by
/// score_penalty per rank step away from the base.
inline std::vector<MapInstance> ensemble_instances(
    const std::vector<std::vector<MapInstance>>& ranked_outputs, double tau_sim = 0.5,
    double score_penalty = 0.9) {
  if (ranked_outputs.empty()) throw std::invalid_argument("ensemble_instances: no models");
  if (!(tau_sim >= 0.0)) throw std::invalid_argument("ensemble_instances: tau_sim must be >= 0");
  if (!(score_penalty >= 0.0 && score_penalty <= 1.0))
    throw std::invalid_argument("ensemble_instances: score_penalty must be in [0,1]");
  std::vector<MapInstance> merged = ranked_outputs.front();
  for (std::size_t rank = 1; rank < ranked_outputs.size(); ++rank) {
    const double discount = std::pow(score_penalty, static_cast<double>(rank));
    for (const MapInstance& cand : ranked_outputs[rank]) {
      double max_sim = 0.0;
      for (const MapInstance& kept : merged) {
        max_sim = std::max(max_sim, instance_similarity(cand, kept));
        if (max_sim >= tau_sim) break;
      }
      if (max_sim < tau_sim) {
        MapInstance inst = cand;
        inst.score *= discount;
        merged.push_back(std::move(inst));
      }
    }
  }
  return merged;
}

}  // namespace vmk
