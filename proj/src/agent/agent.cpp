#include "teach/agent/agent.hpp"

#include "teach/common/error.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace teach::agent {
namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return std::mt19937_64(seq);
}

Eigen::Vector3d logits(const Params& p, const Features& phi, Activations& act) {
    act = forward(p.policy, phi);
    return act.out;
}

}  // namespace

void validate(const AgentConfig& c) {
    if (c.hidden < 1 || c.hidden > 1024) {
        throw ValidationError("agent hidden size must lie in [1, 1024]");
    }
    if (!(c.gamma >= 0 && c.gamma < 1)) {
        throw ValidationError("agent gamma must lie in [0, 1)");
    }
    if (!(c.lr_policy >= 0) || !(c.lr_value >= 0) || !(c.entropy_weight >= 0) || !(c.beta >= 0) ||
        !(c.init_scale >= 0)) {
        throw ValidationError("agent learning rates, weights and init scale must be non-negative");
    }
    if (!(c.d_ref > 0) || !(c.epoch > 0) || !(c.preview > 0)) {
        throw ValidationError("agent d_ref, epoch and preview must be positive");
    }
}

double stress_slope(const std::vector<std::pair<double, double>>& stress, double epoch) {
    if (stress.size() < 2) {
        return 0.0;
    }
    double mt = 0, ms = 0;
    for (const auto& [t, s] : stress) {
        mt += t;
        ms += s;
    }
    const double n = static_cast<double>(stress.size());
    mt /= n;
    ms /= n;
    double sts = 0, stt = 0;
    for (const auto& [t, s] : stress) {
        sts += (t - mt) * (s - ms);
        stt += (t - mt) * (t - mt);
    }
    return stt > 0 ? sts / stt * epoch : 0.0;
}

FeatureVector build_features(const EpochSummary& epoch, double kappa_preview, double epoch_length,
                             const std::optional<FeatureVector>& previous) {
    if (epoch.stress.empty()) {
        FeatureVector out = previous.value_or(FeatureVector{});
        out.phi(4) = 1.0;
        out.stale = true;
        return out;
    }
    double stress_mean = 0;
    for (const auto& sample : epoch.stress) stress_mean += sample.second;
    stress_mean /= static_cast<double>(epoch.stress.size());

    double v_mean = 0;
    for (const auto& s : epoch.vehicle) v_mean += s.v;
    if (!epoch.vehicle.empty()) v_mean /= static_cast<double>(epoch.vehicle.size());

    FeatureVector out;
    out.phi << stress_mean, stress_slope(epoch.stress, epoch_length), v_mean / 30.0, kappa_preview * 100.0, 1.0;
    return out;
}

double compute_reward(double stress_mean, double distance, double beta, double d_ref) {
    return -stress_mean + beta * (distance / d_ref);
}

double compute_reward(const EpochSummary& epoch, double beta, double d_ref) {
    if (epoch.stress.empty()) {
        throw ValidationError("reward needs at least one stress sample");
    }
    double mean = 0;
    for (const auto& sample : epoch.stress) mean += sample.second;
    return compute_reward(mean / static_cast<double>(epoch.stress.size()), epoch.distance, beta, d_ref);
}

int sample_action(const Probs& probs, std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0;
    for (int i = 0; i < kNumActions - 1; ++i) {
        acc += probs(i);
        if (u < acc) return i;
    }
    return kNumActions - 1;
}

int greedy_action(const Probs& probs) {
    int best = 0;
    for (int i = 1; i < kNumActions; ++i) {
        if (probs(i) > probs(best)) best = i;
    }
    return best;
}

Params init_params(const AgentConfig& config) {
    validate(config);
    auto rng = stream(config.seed, 0);
    Params p;
    p.policy = Mlp::uniform(kNumFeatures, config.hidden, kNumActions, config.init_scale, rng);
    p.value = Mlp::uniform(kNumFeatures, config.hidden, 1, config.init_scale, rng);
    return p;
}

Probs policy_forward(const Params& params, const Features& phi) {
    if (!params.policy.all_finite()) {
        throw RuntimeFault("policy network has non-finite parameters");
    }
    Activations act;
    return softmax(logits(params, phi, act));
}

double value_forward(const Params& params, const Features& phi) {
    if (!params.value.all_finite()) {
        throw RuntimeFault("value network has non-finite parameters");
    }
    return forward(params.value, phi).out(0);
}

Mlp grad_log_policy(const Params& params, const Features& phi, int action) {
    Activations act;
    const Probs p = softmax(logits(params, phi, act));
    return backward(params.policy, phi, act, dlogpi_dlogits(p, action));
}

Mlp grad_entropy(const Params& params, const Features& phi) {
    Activations act;
    const Probs p = softmax(logits(params, phi, act));
    return backward(params.policy, phi, act, dentropy_dlogits(p));
}

Mlp grad_value(const Params& params, const Features& phi) {
    const auto act = forward(params.value, phi);
    return backward(params.value, phi, act, Eigen::VectorXd::Ones(1));
}

TdResult td_update(Params& params, const AgentConfig& config, const Transition& t) {
    if (t.action < 0 || t.action >= kNumActions) {
        throw ValidationError("transition action out of range");
    }
    TdResult result;
    const double v = value_forward(params, t.phi);
    const double v_next = t.terminal ? 0.0 : value_forward(params, t.phi_next);
    result.delta = t.reward + config.gamma * v_next - v;
    if (!std::isfinite(result.delta) || !t.phi.allFinite()) {
        return result;
    }

    Activations act;
    const Probs p = softmax(logits(params, t.phi, act));
    const Eigen::Vector3d g = result.delta * dlogpi_dlogits(p, t.action) + config.entropy_weight * dentropy_dlogits(p);
    Mlp policy_step = backward(params.policy, t.phi, act, g);
    Mlp value_step = grad_value(params, t.phi);
    policy_step *= config.lr_policy;
    value_step *= config.lr_value * result.delta;
    if (!policy_step.all_finite() || !value_step.all_finite()) {
        return result;
    }
    params.policy += policy_step;
    params.value += value_step;
    result.applied = true;
    return result;
}

Agent::Agent(AgentConfig config) : Agent(config, init_params(config)) {}

Agent::Agent(AgentConfig config, Params params)
    : config_(config), params_(std::move(params)), rng_(stream(config.seed, 1)) {
    validate(config_);
    if (params_.policy.w1.rows() != config_.hidden || params_.policy.w1.cols() != kNumFeatures ||
        params_.policy.w2.rows() != kNumActions || params_.value.w1.rows() != config_.hidden ||
        params_.value.w1.cols() != kNumFeatures || params_.value.w2.rows() != 1) {
        throw ValidationError("agent parameters do not match the configured layer sizes");
    }
}

Decision Agent::decide(const Features& phi, bool greedy) {
    Decision d;
    d.probs = policy_forward(params_, phi);
    const int a = greedy ? greedy_action(d.probs) : sample_action(d.probs, rng_);
    d.profile = sim::kAllProfiles[static_cast<std::size_t>(a)];
    return d;
}

TdResult Agent::learn(const Transition& t) {
    const auto r = td_update(params_, config_, t);
    if (!r.applied) {
        ++faults_;
        spdlog::warn("agent: update skipped (delta={}, faults={})", r.delta, faults_);
    }
    return r;
}

}  // namespace teach::agent
