#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "scorefollow/align/cost.hpp"
#include "scorefollow/align/oltw.hpp"
#include "scorefollow/core.hpp"

namespace scorefollow {

struct HmmConfig {
  double p_stay = 0.5;
  /// Decay of forward-jump weights: w(d) ∝ exp(-lambda * (d - 1)).
  double lambda = 1.0;
  std::size_t max_jump = 10;
  /// Observation temperature: likelihood = exp(-cost / tau).
  double tau = 0.1;
  CostMetric metric = CostMetric::cosine;

  void validate() const {
    if (!(p_stay >= 0.0 && p_stay < 1.0))
      throw ConfigError("HmmConfig: p_stay must lie in [0, 1)");
    if (!(lambda >= 0.0))
      throw ConfigError("HmmConfig: lambda must be non-negative");
    if (max_jump == 0)
      throw ConfigError("HmmConfig: max_jump must be positive");
    if (!(tau > 0.0))
      throw ConfigError("HmmConfig: tau must be positive");
  }

  /// Normalised forward-jump weights for d = 1..max_jump.
  std::vector<double> jump_weights() const {
    std::vector<double> w(max_jump);
    double sum = 0.0;
    for (std::size_t d = 0; d < max_jump; ++d)
      sum += w[d] = std::exp(-lambda * static_cast<double>(d));
    for (double& v : w)
      v /= sum;
    return w;
  }
};

/// Left-to-right HMM with one state per reference frame and no tempo model.
/// Each step predicts with the transition kernel, weights by the observation
/// likelihood, renormalises, and reports the MAP state.
class HmmFollower : public detail::FollowerCore {
public:
  HmmFollower(std::shared_ptr<const FeatureMatrix> reference, HmmConfig cfg)
      : FollowerCore(std::move(reference)), cfg_(cfg) {
    cfg_.validate();
    const std::size_t n = ref_->size();
    jumps_ = cfg_.jump_weights();
    belief_.assign(n, 0.0);
    belief_[0] = 1.0;
    prior_.assign(n, 0.0);
    cost_.assign(n, 0.0);
  }

  std::size_t step(std::span<const double> frame) {
    check_frame(frame);
    if (gate(frame)) {
      advance();
      return 0;
    }
    predict();
    double cmin = detail::kInf;
    for (std::size_t s = 0; s < cost_.size(); ++s) {
      if (prior_[s] == 0.0)
        continue;
      cost_[s] = detail::cost_unchecked(frame, (*ref_)[s], cfg_.metric);
      cmin = std::min(cmin, cost_[s]);
    }
    // Likelihoods are shifted by the smallest cost inside the prior's
    // support; the shift cancels in the normalisation.
    const double inv_tau = 1.0 / cfg_.tau;
    double z = 0.0;
    for (std::size_t s = 0; s < belief_.size(); ++s) {
      belief_[s] = prior_[s] == 0.0 ? 0.0 : prior_[s] * std::exp(-(cost_[s] - cmin) * inv_tau);
      z += belief_[s];
    }
    finish(z);
    return map_state_;
  }

  /// Update with an externally supplied observation likelihood per state.
  std::size_t step_with_likelihood(std::span<const double> likelihood) {
    if (likelihood.size() != belief_.size())
      throw InputError("step_with_likelihood: one likelihood per state required");
    started_ = true;
    predict();
    double z = 0.0;
    for (std::size_t s = 0; s < belief_.size(); ++s) {
      belief_[s] = prior_[s] * likelihood[s];
      z += belief_[s];
    }
    finish(z);
    return map_state_;
  }

  const std::vector<double>& belief() const noexcept { return belief_; }
  const HmmConfig& config() const noexcept { return cfg_; }
  /// Frames where the observation carried no usable mass and the update fell
  /// back to prediction only.
  std::size_t degenerate_frames() const noexcept { return degenerate_; }
  bool last_degenerate() const noexcept { return last_degenerate_; }

  /// T · belief, written into `out`. Jumps that would leave the model land
  /// on the final state.
  static void transition(std::span<const double> in, std::span<double> out, double p_stay,
                         std::span<const double> jumps) {
    const std::size_t n = in.size();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const double b = in[s];
      if (b == 0.0)
        continue;
      if (s + 1 == n) {
        out[s] += b;
        continue;
      }
      out[s] += p_stay * b;
      const double move = (1.0 - p_stay) * b;
      for (std::size_t d = 1; d <= jumps.size(); ++d)
        out[std::min(s + d, n - 1)] += move * jumps[d - 1];
    }
  }

private:
  void predict() { transition(belief_, prior_, cfg_.p_stay, jumps_); }

  void finish(double z) {
    last_degenerate_ = !(z > 0.0) || !std::isfinite(z);
    if (last_degenerate_) {
      ++degenerate_;
      belief_ = prior_;
      z = 0.0;
      for (double v : belief_)
        z += v;
    }
    const double inv = 1.0 / z;
    for (double& v : belief_)
      v *= inv;
    map_state_ = static_cast<std::size_t>(std::max_element(belief_.begin(), belief_.end()) - belief_.begin());
    finished_ = map_state_ + 1 == belief_.size();
    emit(map_state_);
    advance();
  }

  HmmConfig cfg_;
  std::vector<double> jumps_;
  std::vector<double> belief_;
  std::vector<double> prior_;
  std::vector<double> cost_;
  std::size_t map_state_ = 0;
  std::size_t degenerate_ = 0;
  bool last_degenerate_ = false;
};

}  // namespace scorefollow
