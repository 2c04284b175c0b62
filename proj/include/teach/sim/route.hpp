#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace teach::sim {

/// Something that forces the vehicle down to `v_forced` for `duration`
/// seconds once it comes within the controller's lookahead. `at` is the
/// offset from the start of the owning segment.
struct Obstacle {
    double at = 0;        // m
    double v_forced = 0;  // m/s
    double duration = 0;  // s
    friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct RouteSegment {
    double length = 0;  // m, > 0
    double kappa = 0;   // 1/m, signed, |kappa| <= 0.1
    std::optional<Obstacle> obstacle;
    friend bool operator==(const RouteSegment&, const RouteSegment&) = default;
};

inline constexpr double kMaxCurvature = 0.1;

struct RouteSpec {
    int n_segments = 80;
    double length_min = 100;
    double length_max = 300;
    double kappa_min = -0.04;
    double kappa_max = 0.04;
    double obstacle_rate = 0.05;  // probability that a segment carries an obstacle
};

void validate(const RouteSpec& spec);

/// Piecewise-constant-curvature route.
class Route {
public:
    explicit Route(std::vector<RouteSegment> segments);

    const std::vector<RouteSegment>& segments() const noexcept { return segments_; }
    double total_length() const noexcept { return starts_.back(); }
    double segment_start(std::size_t i) const { return starts_[i]; }

    /// Index of the segment containing s (clamped to the route).
    std::size_t segment_at(double s) const;
    double kappa_at(double s) const;

    /// Length-weighted mean |kappa| over [s, s + horizon], truncated at the
    /// route end; 0 when nothing of the route remains.
    double mean_abs_kappa(double s, double horizon) const;

    /// Largest |kappa| over segments overlapping [s, s + horizon].
    double max_abs_kappa(double s, double horizon) const;

    friend bool operator==(const Route&, const Route&) = default;

private:
    std::vector<RouteSegment> segments_;
    std::vector<double> starts_;  // size n + 1, last = total length
};

/// Deterministic for a given seed. Throws ValidationError for an invalid
/// or empty spec.
Route make_route(std::uint64_t seed, const RouteSpec& spec);

}  // namespace teach::sim
