#include "teach/sim/route.hpp"

#include "teach/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace teach::sim {

void validate(const RouteSpec& spec) {
    if (spec.n_segments <= 0) {
        throw ValidationError("route spec must have at least one segment");
    }
    if (!(spec.length_min > 0) || spec.length_max < spec.length_min) {
        throw ValidationError("route length range must satisfy 0 < min <= max");
    }
    if (spec.kappa_min > spec.kappa_max || std::abs(spec.kappa_min) > kMaxCurvature ||
        std::abs(spec.kappa_max) > kMaxCurvature) {
        throw ValidationError("route curvature range must satisfy min <= max and |kappa| <= 0.1");
    }
    if (!(spec.obstacle_rate >= 0 && spec.obstacle_rate <= 1)) {
        throw ValidationError("obstacle_rate must lie in [0, 1]");
    }
}

Route::Route(std::vector<RouteSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) {
        throw ValidationError("route has no segments");
    }
    starts_.reserve(segments_.size() + 1);
    starts_.push_back(0.0);
    for (const auto& seg : segments_) {
        if (!(seg.length > 0)) {
            throw ValidationError("route segment length must be positive");
        }
        if (std::abs(seg.kappa) > kMaxCurvature) {
            throw ValidationError("route segment curvature exceeds 0.1 1/m");
        }
        starts_.push_back(starts_.back() + seg.length);
    }
}

std::size_t Route::segment_at(double s) const {
    const auto it = std::upper_bound(starts_.begin(), starts_.end() - 1, s);
    if (it == starts_.begin()) {
        return 0;
    }
    return static_cast<std::size_t>(std::distance(starts_.begin(), it) - 1);
}

double Route::kappa_at(double s) const {
    return segments_[segment_at(s)].kappa;
}

double Route::mean_abs_kappa(double s, double horizon) const {
    const double end = std::min(s + horizon, total_length());
    if (!(end > s)) {
        return 0.0;
    }
    double weighted = 0;
    for (std::size_t i = segment_at(s); i < segments_.size() && starts_[i] < end; ++i) {
        const double lo = std::max(s, starts_[i]);
        const double hi = std::min(end, starts_[i + 1]);
        if (hi > lo) {
            weighted += (hi - lo) * std::abs(segments_[i].kappa);
        }
    }
    return weighted / (end - s);
}

double Route::max_abs_kappa(double s, double horizon) const {
    const double end = s + horizon;
    double worst = 0;
    for (std::size_t i = segment_at(s); i < segments_.size() && starts_[i] <= end; ++i) {
        worst = std::max(worst, std::abs(segments_[i].kappa));
    }
    return worst;
}

Route make_route(std::uint64_t seed, const RouteSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> length(spec.length_min, spec.length_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> v_forced(0.0, 5.0);
    std::uniform_real_distribution<double> duration(2.0, 8.0);

    std::vector<RouteSegment> segments;
    segments.reserve(static_cast<std::size_t>(spec.n_segments));
    for (int i = 0; i < spec.n_segments; ++i) {
        RouteSegment seg;
        seg.length = spec.length_max > spec.length_min ? length(rng) : spec.length_min;
        seg.kappa = spec.kappa_min + (spec.kappa_max - spec.kappa_min) * unit(rng);
        // Draws happen unconditionally so obstacle_rate does not shift the
        // geometry stream.
        const double roll = unit(rng);
        Obstacle obstacle{seg.length * unit(rng), v_forced(rng), duration(rng)};
        if (roll < spec.obstacle_rate) {
            seg.obstacle = obstacle;
        }
        segments.push_back(seg);
    }
    return Route(std::move(segments));
}

}  // namespace teach::sim
