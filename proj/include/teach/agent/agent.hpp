#pragma once

#include "teach/agent/network.hpp"
#include "teach/sim/profile.hpp"
#include "teach/sim/vehicle.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace teach::agent {

struct AgentConfig {
    int hidden = 16;
    double lr_policy = 1e-3;
    double lr_value = 5e-3;
    double gamma = 0.9;
    double entropy_weight = 0.01;
    double beta = 0.2;  // progress weight
    double d_ref = 150.0;   // m
    double init_scale = 0.1;
    double epoch = 5.0;     // s
    double preview = 100.0; // m of route ahead for the curvature feature
    std::uint64_t seed = 0;
    friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

/// Throws ValidationError for hidden < 1, gamma outside [0, 1), negative
/// rates or weights, or non-positive d_ref, epoch or preview.
void validate(const AgentConfig& config);

/// Everything observed during one decision epoch.
struct EpochSummary {
    std::vector<std::pair<double, double>> stress;  // (ts, stress)
    std::vector<sim::VehicleState> vehicle;
    double distance = 0;  // m
};

struct FeatureVector {
    Features phi = Features::Zero();
    bool stale = false;
};

/// Least-squares slope of stress over time, multiplied by the epoch length.
/// Zero with fewer than two samples or no time spread.
double stress_slope(const std::vector<std::pair<double, double>>& stress, double epoch);

/// phi = [stress_mean, stress_slope, v_mean / 30, kappa_preview * 100, 1].
/// An empty stress window reuses `previous` (or zeros) flagged stale.
FeatureVector build_features(const EpochSummary& epoch, double kappa_preview, double epoch_length,
                             const std::optional<FeatureVector>& previous = std::nullopt);

/// r = -stress_mean + beta * distance / d_ref.
double compute_reward(double stress_mean, double distance, double beta, double d_ref = 150.0);
double compute_reward(const EpochSummary& epoch, double beta, double d_ref = 150.0);

/// Index drawn with probability probs[i].
int sample_action(const Probs& probs, std::mt19937_64& rng);

/// Argmax, ties to the lower index.
int greedy_action(const Probs& probs);

struct Transition {
    Features phi = Features::Zero();
    int action = 0;
    double reward = 0;
    Features phi_next = Features::Zero();
    bool terminal = false;
};

struct Params {
    Mlp policy;  // 5 -> H tanh -> 3 logits
    Mlp value;   // 5 -> H tanh -> 1
    friend bool operator==(const Params&, const Params&) = default;
};

Params init_params(const AgentConfig& config);

/// Throws RuntimeFault for non-finite parameters.
Probs policy_forward(const Params& params, const Features& phi);
double value_forward(const Params& params, const Features& phi);

/// Analytic gradients with respect to the parameters.
Mlp grad_log_policy(const Params& params, const Features& phi, int action);
Mlp grad_entropy(const Params& params, const Features& phi);
Mlp grad_value(const Params& params, const Features& phi);

struct TdResult {
    double delta = 0;
    bool applied = false;
};

/// One-step actor-critic update. A non-finite TD error or gradient leaves
/// `params` untouched and returns applied = false.
TdResult td_update(Params& params, const AgentConfig& config, const Transition& t);

struct Decision {
    sim::ProfileName profile = sim::ProfileName::Normal;
    Probs probs = Probs::Constant(1.0 / 3.0);
};

/// Owns parameters and the sampling stream.
class Agent {
public:
    explicit Agent(AgentConfig config);
    Agent(AgentConfig config, Params params);

    const AgentConfig& config() const noexcept { return config_; }
    const Params& params() const noexcept { return params_; }
    long faults() const noexcept { return faults_; }

    Decision decide(const Features& phi, bool greedy);
    TdResult learn(const Transition& t);

private:
    AgentConfig config_;
    Params params_;
    std::mt19937_64 rng_;
    long faults_ = 0;
};

}  // namespace teach::agent
