#pragma once

// Central finite-difference reference for the agent's analytic gradients.

#include "teach/agent/agent.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace teach::testing_support {

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + h;
        const double up = f(probe);
        probe(i) = x(i) - h;
        const double down = f(probe);
        probe(i) = x(i);
        g(i) = (up - down) / (2 * h);
    }
    return g;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor). The floor keeps entries
/// that are zero up to roundoff from dominating the metric.
inline double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric,
                                 double floor = 1e-6) {
    double worst = 0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double scale = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
        worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / scale);
    }
    return worst;
}

struct GradDraw {
    agent::Params params;
    agent::Features phi;
    int action = 0;
};

inline GradDraw random_draw(std::mt19937_64& rng, int hidden = 16) {
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GradDraw d;
    d.params.policy = agent::Mlp::uniform(agent::kNumFeatures, hidden, agent::kNumActions, 1.0, rng);
    d.params.value = agent::Mlp::uniform(agent::kNumFeatures, hidden, 1, 1.0, rng);
    d.phi << unit(rng), w(rng) * 0.5, unit(rng) * 1.2, unit(rng) * 5.0, 1.0;
    d.action = static_cast<int>(rng() % agent::kNumActions);
    return d;
}

struct GradErrors {
    double log_policy = 0;
    double entropy = 0;
    double value = 0;
};

/// Analytic vs numeric gradients of log pi(a|phi), H(pi(.|phi)) and V(phi).
inline GradErrors check_gradients(const GradDraw& d) {
    using agent::Params;
    GradErrors e;
    const Eigen::VectorXd theta_pi = d.params.policy.flatten();
    const Eigen::VectorXd theta_v = d.params.value.flatten();

    auto with_policy = [&](const Eigen::VectorXd& flat) {
        Params p = d.params;
        p.policy.assign(flat);
        return p;
    };
    const auto num_logpi = central_difference(
        [&](const Eigen::VectorXd& th) { return std::log(agent::policy_forward(with_policy(th), d.phi)(d.action)); },
        theta_pi);
    const auto num_entropy = central_difference(
        [&](const Eigen::VectorXd& th) { return agent::entropy(agent::policy_forward(with_policy(th), d.phi)); },
        theta_pi);
    const auto num_value = central_difference(
        [&](const Eigen::VectorXd& th) {
            Params p = d.params;
            p.value.assign(th);
            return agent::value_forward(p, d.phi);
        },
        theta_v);

    e.log_policy = max_relative_error(agent::grad_log_policy(d.params, d.phi, d.action).flatten(), num_logpi);
    e.entropy = max_relative_error(agent::grad_entropy(d.params, d.phi).flatten(), num_entropy);
    e.value = max_relative_error(agent::grad_value(d.params, d.phi).flatten(), num_value);
    return e;
}

}  // namespace teach::testing_support
