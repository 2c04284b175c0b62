#include "teach/esn/esn.hpp"

#include "teach/common/error.hpp"
#include "teach/esn/spectral.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace teach::esn {
namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return std::mt19937_64(seq);
}

bool degenerate(const SparseMatrix& m, double radius) {
    return !(radius > 1e-6 * m.norm());
}

}  // namespace

void validate(const EsnConfig& c) {
    if (c.n_reservoir < 1 || c.n_reservoir > 2000) {
        throw ValidationError("esn n_reservoir must lie in [1, 2000]");
    }
    if (!(c.spectral_radius > 0 && c.spectral_radius < 1)) {
        throw ValidationError("esn spectral_radius must lie in (0, 1)");
    }
    if (!(c.leak > 0 && c.leak <= 1)) {
        throw ValidationError("esn leak must lie in (0, 1]");
    }
    if (!(c.density > 0 && c.density <= 1)) {
        throw ValidationError("esn density must lie in (0, 1]");
    }
    if (!(c.input_scaling >= 0) || !std::isfinite(c.input_scaling)) {
        throw ValidationError("esn input_scaling must be non-negative");
    }
    if (!(c.ridge >= 0) || !std::isfinite(c.ridge)) {
        throw ValidationError("esn ridge must be non-negative");
    }
    if (c.washout < 0) {
        throw ValidationError("esn washout must be non-negative");
    }
}

void validate(const FeatureNorm& n) {
    for (double v : {n.eda_mean, n.diff_mean}) {
        if (!std::isfinite(v)) throw ValidationError("feature mean must be finite");
    }
    for (double v : {n.eda_std, n.diff_std}) {
        if (!(v > 0) || !std::isfinite(v)) throw ValidationError("feature std must be positive (degenerate input)");
    }
}

FeatureNorm compute_norm(const std::vector<std::vector<double>>& sequences) {
    double n_eda = 0, n_diff = 0, sum_eda = 0, sum_diff = 0;
    for (const auto& seq : sequences) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (!std::isfinite(seq[i])) throw ValidationError("non-finite eda in training data");
            sum_eda += seq[i];
            n_eda += 1;
            if (i > 0) {
                sum_diff += seq[i] - seq[i - 1];
                n_diff += 1;
            }
        }
    }
    if (n_diff < 1) {
        throw ValidationError("training data needs at least two eda samples in one sequence");
    }
    FeatureNorm norm;
    norm.eda_mean = sum_eda / n_eda;
    norm.diff_mean = sum_diff / n_diff;
    double ss_eda = 0, ss_diff = 0;
    for (const auto& seq : sequences) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            ss_eda += (seq[i] - norm.eda_mean) * (seq[i] - norm.eda_mean);
            if (i > 0) {
                const double d = seq[i] - seq[i - 1] - norm.diff_mean;
                ss_diff += d * d;
            }
        }
    }
    norm.eda_std = std::sqrt(ss_eda / n_eda);
    norm.diff_std = std::sqrt(ss_diff / n_diff);
    if (!(norm.eda_std > 0) || !(norm.diff_std > 0)) {
        throw ValidationError("training eda is constant (std = 0); cannot normalize features");
    }
    return norm;
}

SparseMatrix draw_sparse(const EsnConfig& config, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(config.n_reservoir);
    const auto total = n * n;
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.density * total)));
    std::vector<std::size_t> cells(total);
    std::iota(cells.begin(), cells.end(), 0);
    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    std::sample(cells.begin(), cells.end(), std::back_inserter(chosen), count, rng);

    std::uniform_real_distribution<double> value(-1.0, 1.0);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(count);
    for (auto cell : chosen) {
        triplets.emplace_back(static_cast<int>(cell / n), static_cast<int>(cell % n), value(rng));
    }
    SparseMatrix w(config.n_reservoir, config.n_reservoir);
    w.setFromTriplets(triplets.begin(), triplets.end());
    return w;
}

SparseMatrix scale_to_radius(const SparseMatrix& m, double rho) {
    const auto est = spectral_radius(m);
    if (degenerate(m, est.radius)) {
        throw RuntimeFault("reservoir matrix has zero spectral radius");
    }
    if (!est.converged) {
        spdlog::warn("esn: spectral radius estimate did not converge after {} iterations", est.iterations);
    }
    SparseMatrix out = m * (rho / est.radius);
    out.makeCompressed();
    return out;
}

Reservoir init_reservoir(const EsnConfig& config, const ReservoirDraw& draw) {
    validate(config);
    Reservoir r;
    auto in_rng = stream(config.seed, 0);
    std::uniform_real_distribution<double> in_dist(-config.input_scaling, config.input_scaling);
    r.w_in.resize(config.n_reservoir, 1 + kNumInputs);
    for (Eigen::Index i = 0; i < r.w_in.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.w_in.cols(); ++j) {
            r.w_in(i, j) = config.input_scaling > 0 ? in_dist(in_rng) : 0.0;
        }
    }
    for (int attempt = 0; attempt < kMaxReservoirDraws; ++attempt) {
        auto rng = stream(config.seed, 1 + static_cast<std::uint32_t>(attempt));
        SparseMatrix w = draw(config, rng);
        if (w.rows() != config.n_reservoir || w.cols() != config.n_reservoir) {
            throw ValidationError("reservoir draw has wrong dimensions");
        }
        const auto est = spectral_radius(w);
        if (degenerate(w, est.radius)) {
            spdlog::info("esn: degenerate reservoir draw {} (spectral radius 0), redrawing", attempt + 1);
            continue;
        }
        SparseMatrix scaled = w * (config.spectral_radius / est.radius);
        scaled.makeCompressed();
        // A defective spectrum can fool the estimate; the rescaled matrix
        // must reproduce the target or the draw is discarded.
        if (std::abs(spectral_radius(scaled).radius - config.spectral_radius) > 1e-7) {
            spdlog::info("esn: reservoir draw {} did not rescale to the target radius, redrawing", attempt + 1);
            continue;
        }
        r.w = std::move(scaled);
        r.attempts = attempt + 1;
        return r;
    }
    throw RuntimeFault("reservoir draw degenerate after " + std::to_string(kMaxReservoirDraws) + " attempts");
}

EsnState initial_state(const EsnModel& model) {
    return {Eigen::VectorXd::Zero(model.w.rows()), 0};
}

Eigen::Vector2d featurize(const FeatureNorm& norm, double eda, double diff) {
    return {(eda - norm.eda_mean) / norm.eda_std, (diff - norm.diff_mean) / norm.diff_std};
}

std::optional<Eigen::Vector2d> Featurizer::push(double eda) {
    if (!std::isfinite(eda)) {
        return std::nullopt;
    }
    const auto prev = prev_;
    prev_ = eda;
    if (!prev) {
        return std::nullopt;
    }
    return featurize(norm_, eda, eda - *prev);
}

bool esn_step(const EsnModel& model, EsnState& state, const Eigen::Vector2d& u) {
    if (!u.allFinite()) {
        return false;
    }
    if (state.x.size() != model.w.rows() || model.w_in.rows() != model.w.rows() ||
        model.w_in.cols() != 1 + kNumInputs) {
        throw ValidationError("esn state and model dimensions disagree");
    }
    Eigen::Vector3d in;
    in << 1.0, u;
    const Eigen::VectorXd pre = model.w_in * in + model.w * state.x;
    const double a = model.config.leak;
    state.x = (1.0 - a) * state.x + a * pre.array().tanh().matrix();
    ++state.samples_seen;
    return true;
}

Eigen::VectorXd readout_input(const Eigen::Vector2d& u, const Eigen::VectorXd& x) {
    Eigen::VectorXd z(1 + kNumInputs + x.size());
    z << 1.0, u, x;
    return z;
}

double readout(const Eigen::RowVectorXd& w_out, const Eigen::Vector2d& u, const Eigen::VectorXd& x) {
    if (w_out.size() != 1 + kNumInputs + x.size()) {
        throw ValidationError("readout weights and state dimensions disagree");
    }
    return w_out.dot(readout_input(u, x).transpose());
}

std::optional<double> esn_predict(const EsnModel& model, const EsnState& state, const Eigen::Vector2d& u) {
    if (state.samples_seen <= model.config.washout) {
        return std::nullopt;
    }
    return std::clamp(readout(model.w_out, u, state.x), 0.0, 1.0);
}

Eigen::RowVectorXd fit_readout(const Eigen::MatrixXd& states, const Eigen::RowVectorXd& targets, double lambda,
                               int washout) {
    if (states.cols() != targets.size()) {
        throw ValidationError("state and target counts disagree");
    }
    if (washout < 0 || states.cols() <= washout) {
        throw ValidationError("need more samples than the washout to fit the readout");
    }
    if (!(lambda >= 0) || !std::isfinite(lambda)) {
        throw ValidationError("ridge lambda must be non-negative");
    }
    const Eigen::Index t0 = washout;
    const Eigen::Index t = states.cols() - t0;
    const auto s = states.rightCols(t);
    const auto y = targets.tail(t);
    if (!s.allFinite() || !y.allFinite()) {
        throw ValidationError("non-finite values in readout training data");
    }
    const Eigen::Index d = s.rows();

    Eigen::MatrixXd a = s * s.transpose();
    a.diagonal().array() += lambda;
    const Eigen::VectorXd b = s * y.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const auto pivots = ldlt.vectorD().cwiseAbs();
    const bool rank_deficient = pivots.minCoeff() <= 1e-13 * pivots.maxCoeff();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (lambda == 0 && rank_deficient)) {
        throw ValidationError("readout system is singular; use a ridge lambda > 0");
    }
    Eigen::VectorXd w = ldlt.solve(b);

    // Residual b - A w straight from S in long double; A rounded to double
    // would otherwise cap accuracy at cond(A) * eps.
    for (int pass = 0; pass < 3; ++pass) {
        std::vector<long double> err(static_cast<std::size_t>(t));
        for (Eigen::Index c = 0; c < t; ++c) {
            long double acc = y(c);
            for (Eigen::Index r = 0; r < d; ++r) acc -= static_cast<long double>(s(r, c)) * w(r);
            err[static_cast<std::size_t>(c)] = acc;
        }
        Eigen::VectorXd residual(d);
        for (Eigen::Index r = 0; r < d; ++r) {
            long double acc = -static_cast<long double>(lambda) * w(r);
            for (Eigen::Index c = 0; c < t; ++c) acc += static_cast<long double>(s(r, c)) * err[static_cast<std::size_t>(c)];
            residual(r) = static_cast<double>(acc);
        }
        w += ldlt.solve(residual);
    }
    if (!w.allFinite()) {
        throw RuntimeFault("readout solve produced non-finite weights");
    }
    return w.transpose();
}

std::vector<std::optional<double>> predict_sequence(const EsnModel& model, const std::vector<double>& eda) {
    std::vector<std::optional<double>> out(eda.size());
    Featurizer feat(model.norm);
    EsnState state = initial_state(model);
    for (std::size_t i = 0; i < eda.size(); ++i) {
        const auto u = feat.push(eda[i]);
        if (u && esn_step(model, state, *u)) {
            out[i] = esn_predict(model, state, *u);
        }
    }
    return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ValidationError("correlation needs two equal-length series of at least two values");
    }
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0) {
        return 0.0;
    }
    return sab / std::sqrt(saa * sbb);
}

EsnModel train_esn(const std::vector<Sequence>& sequences, const EsnConfig& config, TrainReport* report) {
    validate(config);
    std::vector<std::vector<double>> eda;
    for (const auto& seq : sequences) {
        if (seq.eda.size() != seq.label.size()) {
            throw ValidationError("eda and label lengths disagree");
        }
        for (double l : seq.label) {
            if (!(l >= 0 && l <= 1)) throw ValidationError("labels must lie in [0, 1]");
        }
        eda.push_back(seq.eda);
    }
    EsnModel model;
    model.config = config;
    model.norm = compute_norm(eda);
    auto reservoir = init_reservoir(config);
    model.w_in = std::move(reservoir.w_in);
    model.w = std::move(reservoir.w);

    std::vector<Eigen::VectorXd> columns;
    std::vector<double> targets;
    for (const auto& seq : sequences) {
        Featurizer feat(model.norm);
        EsnState state = initial_state(model);
        for (std::size_t i = 0; i < seq.eda.size(); ++i) {
            const auto u = feat.push(seq.eda[i]);
            if (!u || !esn_step(model, state, *u)) continue;
            if (state.samples_seen > config.washout) {
                columns.push_back(readout_input(*u, state.x));
                targets.push_back(seq.label[i]);
            }
        }
    }
    if (columns.empty()) {
        throw ValidationError("training sequences are shorter than the washout");
    }
    Eigen::MatrixXd s(columns.front().size(), static_cast<Eigen::Index>(columns.size()));
    Eigen::RowVectorXd y(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        s.col(static_cast<Eigen::Index>(c)) = columns[c];
        y(static_cast<Eigen::Index>(c)) = targets[c];
    }
    model.w_out = fit_readout(s, y, config.ridge, 0);

    if (report) {
        std::vector<double> pred(targets.size());
        double se = 0;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            pred[c] = std::clamp(model.w_out.dot(columns[c].transpose()), 0.0, 1.0);
            se += (pred[c] - targets[c]) * (pred[c] - targets[c]);
        }
        report->columns = columns.size();
        report->train_rmse = std::sqrt(se / static_cast<double>(columns.size()));
        report->train_corr = pearson(pred, targets);
    }
    return model;
}

EvalReport evaluate(const EsnModel& model, const std::vector<Sequence>& sequences) {
    std::vector<double> pred, truth;
    for (const auto& seq : sequences) {
        const auto p = predict_sequence(model, seq.eda);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i]) {
                pred.push_back(*p[i]);
                truth.push_back(seq.label.at(i));
            }
        }
    }
    EvalReport r;
    r.samples = pred.size();
    if (pred.size() < 2) {
        throw ValidationError("evaluation sequences are shorter than the washout");
    }
    double se = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    r.rmse = std::sqrt(se / static_cast<double>(pred.size()));
    r.corr = pearson(pred, truth);
    return r;
}

StressEstimator::StressEstimator(EsnModel model, double half_life)
    : model_(std::move(model)), half_life_(half_life), featurizer_(model_.norm), state_(initial_state(model_)) {
    if (!(half_life_ > 0)) {
        throw ValidationError("smoothing half-life must be positive");
    }
}

std::optional<double> StressEstimator::push(double ts, double eda) {
    if (!std::isfinite(eda) || !std::isfinite(ts)) {
        ++faults_;
        spdlog::warn("esn: rejected non-finite sample at ts={} (faults={})", ts, faults_);
        return std::nullopt;
    }
    const auto u = featurizer_.push(eda);
    if (!u || !esn_step(model_, state_, *u)) {
        return std::nullopt;
    }
    const auto raw = esn_predict(model_, state_, *u);
    if (!raw) {
        return std::nullopt;
    }
    last_raw_ = raw;
    if (!smoothed_) {
        smoothed_ = *raw;
    } else {
        const double dt = std::max(0.0, ts - last_ts_.value_or(ts));
        const double gain = 1.0 - std::exp2(-dt / half_life_);
        smoothed_ = *smoothed_ + gain * (*raw - *smoothed_);
    }
    last_ts_ = ts;
    return smoothed_;
}

}  // namespace teach::esn
