#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string_view>

#include "scorefollow/core.hpp"
#include "scorefollow/features.hpp"

namespace scorefollow {

enum class CostMetric { cosine, l1, l2 };

inline std::string_view to_string(CostMetric m) {
  switch (m) {
    case CostMetric::cosine: return "cosine";
    case CostMetric::l1: return "l1";
    case CostMetric::l2: return "l2";
  }
  return "?";
}

inline std::optional<CostMetric> cost_metric_from_string(std::string_view s) {
  for (auto m : {CostMetric::cosine, CostMetric::l1, CostMetric::l2})
    if (to_string(m) == s)
      return m;
  return std::nullopt;
}

/// Cosine for every kind. L1 on onset energies is dominated by loudness
/// differences between the reference synthesiser and the performer.
constexpr CostMetric default_metric(FeatureKind) noexcept { return CostMetric::cosine; }

namespace detail {

inline double cost_unchecked(std::span<const double> x, std::span<const double> y, CostMetric metric) noexcept {
  switch (metric) {
    case CostMetric::cosine: {
      double dot = 0.0, xx = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        xx += x[i] * x[i];
        yy += y[i] * y[i];
      }
      if (xx == 0.0 || yy == 0.0)
        return 1.0;
      // Clamp away rounding below zero for parallel vectors.
      return std::max(0.0, 1.0 - dot / std::sqrt(xx * yy));
    }
    case CostMetric::l1: {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        s += std::abs(x[i] - y[i]);
      return s;
    }
    case CostMetric::l2: {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        s += (x[i] - y[i]) * (x[i] - y[i]);
      return std::sqrt(s);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Non-negative dissimilarity of two feature vectors. Under cosine distance a
/// zero vector is at distance 1 from everything, itself included.
inline double local_cost(std::span<const double> x, std::span<const double> y, CostMetric metric) {
  if (x.size() != y.size())
    throw InputError("local_cost: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  return detail::cost_unchecked(x, y, metric);
}

}  // namespace scorefollow
