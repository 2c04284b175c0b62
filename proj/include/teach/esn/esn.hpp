#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace teach::esn {

inline constexpr int kNumInputs = 2;  // normalized eda and its first difference

struct EsnConfig {
    int n_reservoir = 100;
    double spectral_radius = 0.9;
    double leak = 0.2;
    double input_scaling = 0.5;
    double density = 0.1;
    double ridge = 1e-4;
    int washout = 80;  // samples
    std::uint64_t seed = 0;
    friend bool operator==(const EsnConfig&, const EsnConfig&) = default;
};

/// Throws ValidationError unless 0 < rho < 1, 0 < leak <= 1,
/// 0 < density <= 1, input_scaling >= 0, ridge >= 0, washout >= 0 and
/// 1 <= n_reservoir <= 2000.
void validate(const EsnConfig& config);

/// Training-set statistics for the two input features.
struct FeatureNorm {
    double eda_mean = 0;
    double eda_std = 1;
    double diff_mean = 0;
    double diff_std = 1;
    friend bool operator==(const FeatureNorm&, const FeatureNorm&) = default;
};

/// Throws ValidationError when a std is not strictly positive and finite.
void validate(const FeatureNorm& norm);

/// Population mean/std of eda and of its within-sequence first difference.
/// Throws ValidationError for constant input (std = 0).
FeatureNorm compute_norm(const std::vector<std::vector<double>>& eda_sequences);

using SparseMatrix = Eigen::SparseMatrix<double>;

struct Reservoir {
    Eigen::MatrixXd w_in;  // n x (1 + kNumInputs)
    SparseMatrix w;        // n x n
    int attempts = 1;      // draws needed to get a nonzero spectral radius
};

/// Source of the unscaled recurrent matrix for one attempt.
using ReservoirDraw = std::function<SparseMatrix(const EsnConfig&, std::mt19937_64&)>;

/// `density` fraction of entries uniform(-1, 1).
SparseMatrix draw_sparse(const EsnConfig& config, std::mt19937_64& rng);

inline constexpr int kMaxReservoirDraws = 10;

/// W_in uniform(-input_scaling, input_scaling); W rescaled to the configured
/// spectral radius. A draw with zero spectral radius is replaced by one from
/// the next seed stream, up to kMaxReservoirDraws, then RuntimeFault.
Reservoir init_reservoir(const EsnConfig& config, const ReservoirDraw& draw = draw_sparse);

/// Multiplies m by rho / rho_hat. Throws RuntimeFault when rho_hat is zero.
SparseMatrix scale_to_radius(const SparseMatrix& m, double rho);

struct EsnModel {
    EsnConfig config;
    FeatureNorm norm;
    Eigen::MatrixXd w_in;
    SparseMatrix w;
    Eigen::RowVectorXd w_out;  // 1 x (1 + kNumInputs + n)
};

struct EsnState {
    Eigen::VectorXd x;
    long samples_seen = 0;
};

EsnState initial_state(const EsnModel& model);

/// Turns a raw eda stream into normalized inputs. The first sample only
/// primes the difference and yields nothing.
class Featurizer {
public:
    explicit Featurizer(FeatureNorm norm) : norm_(norm) {}
    std::optional<Eigen::Vector2d> push(double eda);
    void reset() { prev_.reset(); }

private:
    FeatureNorm norm_;
    std::optional<double> prev_;
};

Eigen::Vector2d featurize(const FeatureNorm& norm, double eda, double diff);

/// x' = (1 - a) x + a tanh(W_in [1; u] + W x). Returns false and leaves the
/// state untouched for non-finite input.
bool esn_step(const EsnModel& model, EsnState& state, const Eigen::Vector2d& u);

/// Augmented readout input [1; u; x].
Eigen::VectorXd readout_input(const Eigen::Vector2d& u, const Eigen::VectorXd& x);

/// W_out . [1; u; x] without clipping.
double readout(const Eigen::RowVectorXd& w_out, const Eigen::Vector2d& u, const Eigen::VectorXd& x);

/// Clipped to [0, 1]; nullopt while samples_seen <= washout.
std::optional<double> esn_predict(const EsnModel& model, const EsnState& state, const Eigen::Vector2d& u);

/// Ridge readout W_out = Y S^T (S S^T + lambda I)^-1 over columns from
/// `washout` on. Refined against residuals evaluated in extended precision.
/// Throws ValidationError when no columns remain, dimensions disagree, or
/// lambda = 0 leaves the system singular.
Eigen::RowVectorXd fit_readout(const Eigen::MatrixXd& states, const Eigen::RowVectorXd& targets, double lambda,
                               int washout = 0);

/// Predictions for every input after the first, with nullopt during
/// warm-up. Runs the same per-sample arithmetic as the streaming path.
std::vector<std::optional<double>> predict_sequence(const EsnModel& model, const std::vector<double>& eda);

struct Sequence {
    std::vector<double> eda;
    std::vector<double> label;  // stress in [0, 1], same length
};

struct TrainReport {
    double train_rmse = 0;
    double train_corr = 0;
    std::size_t columns = 0;
};

/// Normalization, reservoir, state collection and ridge fit.
EsnModel train_esn(const std::vector<Sequence>& sequences, const EsnConfig& config, TrainReport* report = nullptr);

struct EvalReport {
    double corr = 0;  // Pearson, raw clipped predictions vs labels
    double rmse = 0;
    std::size_t samples = 0;
};

EvalReport evaluate(const EsnModel& model, const std::vector<Sequence>& sequences);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Streaming inference: featurize, step, predict, then an exponential
/// moving average with the given half-life keyed on sample timestamps.
class StressEstimator {
public:
    explicit StressEstimator(EsnModel model, double half_life = 2.0);

    /// Smoothed stress once warm, else nullopt. Non-finite eda counts as a
    /// fault and leaves everything unchanged.
    std::optional<double> push(double ts, double eda);

    std::optional<double> last_raw() const noexcept { return last_raw_; }
    long faults() const noexcept { return faults_; }
    bool warm() const noexcept { return smoothed_.has_value(); }
    const EsnState& state() const noexcept { return state_; }

private:
    EsnModel model_;
    double half_life_;
    Featurizer featurizer_;
    EsnState state_;
    std::optional<double> last_raw_;
    std::optional<double> smoothed_;
    std::optional<double> last_ts_;
    long faults_ = 0;
};

}  // namespace teach::esn
