#pragma once

#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include "scorefollow/align/cost.hpp"
#include "scorefollow/align/hmm.hpp"
#include "scorefollow/align/oltw.hpp"

namespace scorefollow {

enum class FollowerKind { dixon, arzt, hmm };

inline std::string_view to_string(FollowerKind k) {
  switch (k) {
    case FollowerKind::dixon: return "dixon";
    case FollowerKind::arzt: return "arzt";
    case FollowerKind::hmm: return "hmm";
  }
  return "?";
}

inline std::optional<FollowerKind> follower_kind_from_string(std::string_view s) {
  for (auto k : {FollowerKind::dixon, FollowerKind::arzt, FollowerKind::hmm})
    if (to_string(k) == s)
      return k;
  return std::nullopt;
}

struct AlignConfig {
  FollowerKind kind = FollowerKind::arzt;
  /// Unset: chosen from the feature kind (see default_metric).
  std::optional<CostMetric> metric;
  OltwConfig oltw{};
  HmmConfig hmm{};
};

/// Type-erased follower over the three algorithms.
class Follower {
public:
  Follower(std::shared_ptr<const FeatureMatrix> reference, FeatureKind features, const AlignConfig& cfg)
      : impl_(make(std::move(reference), features, cfg)) {}

  std::size_t step(std::span<const double> frame) {
    return std::visit([&](auto& f) { return f.step(frame); }, impl_);
  }
  const WarpingPath& path() const noexcept {
    return std::visit([](const auto& f) -> const WarpingPath& { return f.path(); }, impl_);
  }
  WarpingPath finalize() const {
    return std::visit([](const auto& f) { return f.finalize(); }, impl_);
  }
  bool finished() const noexcept {
    return std::visit([](const auto& f) { return f.finished(); }, impl_);
  }
  std::size_t steps() const noexcept {
    return std::visit([](const auto& f) { return f.steps(); }, impl_);
  }

private:
  using Impl = std::variant<OltwDixon, OltwArzt, HmmFollower>;

  static Impl make(std::shared_ptr<const FeatureMatrix> ref, FeatureKind features, AlignConfig cfg) {
    const CostMetric metric = cfg.metric.value_or(default_metric(features));
    switch (cfg.kind) {
      case FollowerKind::dixon: cfg.oltw.metric = metric; return Impl(std::in_place_type<OltwDixon>, std::move(ref), cfg.oltw);
      case FollowerKind::arzt: cfg.oltw.metric = metric; return Impl(std::in_place_type<OltwArzt>, std::move(ref), cfg.oltw);
      case FollowerKind::hmm: cfg.hmm.metric = metric; return Impl(std::in_place_type<HmmFollower>, std::move(ref), cfg.hmm);
    }
    throw ConfigError("unknown follower kind");
  }

  Impl impl_;
};

/// Path dump: one `u<TAB>v` line per pair, in emission order.
inline void write_path(std::ostream& os, const WarpingPath& path) {
  for (const auto& p : path)
    os << p.u << '\t' << p.v << '\n';
}

inline WarpingPath read_path(std::istream& is) {
  WarpingPath path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    long long u = -1, v = -1;
    if (!(ls >> u >> v) || u < 0 || v < 0)
      throw ParseError("path: malformed line " + std::to_string(lineno));
    try {
      path.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
    } catch (const InputError&) {
      throw ParseError("path: performance index decreases at line " + std::to_string(lineno));
    }
  }
  return path;
}

}  // namespace scorefollow
