#include "oracles.hpp"
#include "teach/common/error.hpp"
#include "teach/esn/esn.hpp"
#include "teach/esn/serialize.hpp"
#include "teach/esn/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace teach::esn {
namespace {

using testing_support::dense_spectral_radius;
using testing_support::ridge_oracle;

SparseMatrix from_dense(const Eigen::MatrixXd& d) {
    SparseMatrix s = d.sparseView();
    s.makeCompressed();
    return s;
}

EsnModel tiny_model(int n = 3) {
    EsnModel m;
    m.config.n_reservoir = n;
    m.config.washout = 0;
    m.w_in = Eigen::MatrixXd::Zero(n, 3);
    m.w = SparseMatrix(n, n);
    m.w_out = Eigen::RowVectorXd::Zero(3 + n);
    return m;
}

std::vector<double> synthetic_eda(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 0.05);
    std::vector<double> out;
    double level = 3.0;
    for (int i = 0; i < n; ++i) {
        level += g(rng);
        out.push_back(level + 0.5 * std::sin(i * 0.05));
    }
    return out;
}

TEST(EsnConfig, Validation) {
    EXPECT_NO_THROW(validate(EsnConfig{}));
    for (auto mutate : std::vector<void (*)(EsnConfig&)>{
             [](EsnConfig& c) { c.spectral_radius = 1.0; }, [](EsnConfig& c) { c.spectral_radius = 0.0; },
             [](EsnConfig& c) { c.n_reservoir = 0; },       [](EsnConfig& c) { c.washout = -1; },
             [](EsnConfig& c) { c.leak = 0.0; },            [](EsnConfig& c) { c.density = 1.5; },
             [](EsnConfig& c) { c.ridge = -1; }}) {
        EsnConfig c;
        mutate(c);
        EXPECT_THROW(validate(c), ValidationError);
    }
}

TEST(Spectral, DiagonalAndRotation) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 1;
    d(1, 1) = 2;
    EXPECT_NEAR(spectral_radius(from_dense(d)).radius, 2.0, 1e-12);

    // Block diagonal of scaled rotations: dominant eigenvalues are a complex
    // pair, which defeats plain power iteration.
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(60, 60);
    for (int b = 0; b < 30; ++b) {
        const double scale = 0.5 + 0.01 * b;
        const double a = 0.3 + 0.1 * b;
        r(2 * b, 2 * b) = scale * std::cos(a);
        r(2 * b, 2 * b + 1) = -scale * std::sin(a);
        r(2 * b + 1, 2 * b) = scale * std::sin(a);
        r(2 * b + 1, 2 * b + 1) = scale * std::cos(a);
    }
    const auto est = spectral_radius(from_dense(r));
    EXPECT_TRUE(est.converged);
    EXPECT_NEAR(est.radius, 0.79, 1e-9);
}

TEST(Spectral, NilpotentIsZero) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 1) = 2;
    EXPECT_LT(spectral_radius(from_dense(d)).radius, 1e-6);
    EXPECT_EQ(spectral_radius(SparseMatrix(40, 40)).radius, 0.0);

    // A longer Jordan chain has ill-conditioned eigenvalues, so no solver
    // returns exactly zero; the reservoir init must still reject it.
    EsnConfig c;
    c.n_reservoir = 6;
    EXPECT_THROW(init_reservoir(c,
                                [](const EsnConfig&, std::mt19937_64&) {
                                    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(6, 6);
                                    for (int i = 0; i + 1 < 6; ++i) u(i, i + 1) = 1.0;
                                    return from_dense(u);
                                }),
                 RuntimeFault);
}

TEST(Spectral, MatchesDenseEigensolverOnRandomReservoirs) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EsnConfig c;
        c.seed = seed;
        c.n_reservoir = 40 + static_cast<int>(seed) * 7;
        std::mt19937_64 rng(seed);
        const auto w = draw_sparse(c, rng);
        const auto est = spectral_radius(w);
        EXPECT_TRUE(est.converged) << seed;
        EXPECT_NEAR(est.radius, dense_spectral_radius(w), 1e-8 * dense_spectral_radius(w)) << seed;
    }
}

TEST(Reservoir, DiagonalDrawScaled) {
    EsnConfig c;
    c.n_reservoir = 2;
    c.spectral_radius = 0.9;
    const auto r = init_reservoir(c, [](const EsnConfig&, std::mt19937_64&) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
        d(0, 0) = 1;
        d(1, 1) = 2;
        return from_dense(d);
    });
    const Eigen::MatrixXd w(r.w);
    EXPECT_NEAR(w(0, 0), 0.45, 1e-12);
    EXPECT_NEAR(w(1, 1), 0.9, 1e-12);
    EXPECT_EQ(w(0, 1), 0.0);
    EXPECT_EQ(r.attempts, 1);
}

TEST(Reservoir, NilpotentDrawIsRedrawn) {
    EsnConfig c;
    c.n_reservoir = 2;
    int calls = 0;
    const auto r = init_reservoir(c, [&](const EsnConfig&, std::mt19937_64&) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
        if (calls++ == 0) {
            d(0, 1) = 2;
        } else {
            d(0, 0) = 1;
            d(1, 1) = 2;
        }
        return from_dense(d);
    });
    EXPECT_EQ(r.attempts, 2);
    EXPECT_NEAR(Eigen::MatrixXd(r.w)(1, 1), 0.9, 1e-12);

    calls = 0;
    EXPECT_THROW(init_reservoir(c,
                                [&](const EsnConfig&, std::mt19937_64&) {
                                    ++calls;
                                    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
                                    d(0, 1) = 2;
                                    return from_dense(d);
                                }),
                 RuntimeFault);
    EXPECT_EQ(calls, kMaxReservoirDraws);
    EXPECT_THROW(scale_to_radius(SparseMatrix(3, 3), 0.9), RuntimeFault);
}

TEST(Reservoir, DeterministicAndShaped) {
    EsnConfig c;
    c.seed = 77;
    const auto a = init_reservoir(c);
    const auto b = init_reservoir(c);
    EXPECT_TRUE(a.w_in == b.w_in);
    EXPECT_TRUE(Eigen::MatrixXd(a.w) == Eigen::MatrixXd(b.w));
    EXPECT_EQ(a.w.nonZeros(), 1000);
    EXPECT_EQ(a.w_in.rows(), 100);
    EXPECT_EQ(a.w_in.cols(), 3);
    EXPECT_LE(a.w_in.cwiseAbs().maxCoeff(), 0.5);
    c.seed = 78;
    EXPECT_FALSE(init_reservoir(c).w_in == a.w_in);
}

TEST(Reservoir, ScaledRadiusMatchesConfigForManySeeds) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EsnConfig c;
        c.seed = seed;
        const auto r = init_reservoir(c);
        EXPECT_NEAR(dense_spectral_radius(r.w), 0.9, 1e-6) << seed;
        EXPECT_NEAR(spectral_radius(r.w).radius, 0.9, 1e-6) << seed;
    }
}

TEST(Features, CenteringAndScaling) {
    const FeatureNorm n{3.0, 0.5, 0.01, 0.2};
    EXPECT_TRUE(featurize(n, 3.0, 0.01).isZero());
    EXPECT_DOUBLE_EQ(featurize(n, 3.5, 0.01)(0), 1.0);
    EXPECT_DOUBLE_EQ(featurize(n, 3.0, 0.21)(1), 1.0);

    Featurizer f(n);
    EXPECT_FALSE(f.push(3.0).has_value());
    const auto u = f.push(3.5);
    ASSERT_TRUE(u.has_value());
    EXPECT_DOUBLE_EQ((*u)(0), 1.0);
    EXPECT_DOUBLE_EQ((*u)(1), (0.5 - 0.01) / 0.2);
}

TEST(Features, NormFromDataAndDegenerateInput) {
    const auto n = compute_norm({{1, 2, 4}, {5}});
    EXPECT_DOUBLE_EQ(n.eda_mean, 3.0);
    EXPECT_DOUBLE_EQ(n.diff_mean, 1.5);
    EXPECT_DOUBLE_EQ(n.diff_std, 0.5);
    EXPECT_THROW(compute_norm({{2, 2, 2, 2}}), ValidationError);
    EXPECT_THROW(validate(FeatureNorm{0, 0, 0, 1}), ValidationError);

    std::vector<Sequence> flat{{std::vector<double>(200, 2.0), std::vector<double>(200, 0.5)}};
    EXPECT_THROW(train_esn(flat, EsnConfig{}), ValidationError);
}

TEST(Step, Examples) {
    auto m = tiny_model();
    m.w_in.setConstant(0.3);
    m.w = from_dense(Eigen::MatrixXd::Constant(3, 3, 0.1));
    EsnState s{Eigen::Vector3d(0.2, -0.4, 0.9), 0};

    m.config.leak = 0.0;
    auto copy = s;
    ASSERT_TRUE(esn_step(m, copy, Eigen::Vector2d(1, 2)));
    EXPECT_TRUE(copy.x == s.x);
    EXPECT_EQ(copy.samples_seen, 1);

    auto zero = tiny_model();
    zero.config.leak = 0.7;
    EsnState z = initial_state(zero);
    esn_step(zero, z, Eigen::Vector2d(5, -3));
    EXPECT_TRUE(z.x.isZero(0));

    // W_in [1; u] = 0 with a nonzero W_in: bias cancels the inputs.
    auto cancel = tiny_model();
    cancel.config.leak = 1.0;
    cancel.w_in.col(0).setConstant(-1.0);
    cancel.w_in.col(1).setConstant(1.0);
    EsnState c = initial_state(cancel);
    esn_step(cancel, c, Eigen::Vector2d(1.0, 7.0 * 0));
    EXPECT_TRUE(c.x.isZero(0));
}

TEST(Step, NonFiniteInputRejected) {
    auto m = tiny_model();
    m.config.leak = 0.5;
    m.w_in.setConstant(1.0);
    EsnState s = initial_state(m);
    EXPECT_FALSE(esn_step(m, s, Eigen::Vector2d(std::nan(""), 0)));
    EXPECT_FALSE(esn_step(m, s, Eigen::Vector2d(0, INFINITY)));
    EXPECT_TRUE(s.x.isZero(0));
    EXPECT_EQ(s.samples_seen, 0);
}

TEST(Step, StateStaysInUnitBall) {
    EsnConfig c;
    c.input_scaling = 5.0;
    c.leak = 0.9;
    auto r = init_reservoir(c);
    EsnModel m{c, {}, r.w_in, r.w, Eigen::RowVectorXd::Zero(103)};
    EsnState s = initial_state(m);
    s.x.setConstant(1.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 50);
    for (int k = 0; k < 2000; ++k) {
        esn_step(m, s, Eigen::Vector2d(g(rng), g(rng)));
        ASSERT_LE(s.x.cwiseAbs().maxCoeff(), 1.0);
    }
}

TEST(Step, FadingMemory) {
    EsnConfig c;
    c.seed = 4;
    auto r = init_reservoir(c);
    EsnModel m{c, {}, r.w_in, r.w, Eigen::RowVectorXd::Zero(103)};
    EsnState a = initial_state(m);
    EsnState b = initial_state(m);
    b.x.setConstant(0.9);
    a.x.setConstant(-0.9);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 1);
    int converged_at = -1;
    for (int k = 0; k < 3000; ++k) {
        const Eigen::Vector2d u(g(rng), g(rng));
        esn_step(m, a, u);
        esn_step(m, b, u);
        if ((a.x - b.x).norm() < 1e-6) {
            converged_at = k;
            break;
        }
    }
    EXPECT_GE(converged_at, 0);
}

TEST(Predict, ClampAndWarmup) {
    auto m = tiny_model();
    m.config.washout = 0;
    EsnState s = initial_state(m);
    s.samples_seen = 1;
    const Eigen::Vector2d u(0, 0);
    EXPECT_EQ(esn_predict(m, s, u), 0.0);
    m.w_out(0) = -0.2;
    EXPECT_EQ(esn_predict(m, s, u), 0.0);
    m.w_out(0) = 1.3;
    EXPECT_EQ(esn_predict(m, s, u), 1.0);
    m.w_out(0) = 0.42;
    EXPECT_EQ(esn_predict(m, s, u), 0.42);
    m.config.washout = 5;
    s.samples_seen = 5;
    EXPECT_FALSE(esn_predict(m, s, u).has_value());
    s.samples_seen = 6;
    EXPECT_TRUE(esn_predict(m, s, u).has_value());
}

TEST(Readout, ScalarExample) {
    Eigen::MatrixXd s(1, 1);
    s << 1;
    Eigen::RowVectorXd y(1);
    y << 2;
    EXPECT_DOUBLE_EQ(fit_readout(s, y, 1.0)(0), 1.0);
}

TEST(Readout, HeavyRidgeShrinksToZero) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd s(5, 50);
    Eigen::RowVectorXd y(50);
    for (int c = 0; c < 50; ++c) {
        for (int r = 0; r < 5; ++r) s(r, c) = u(rng);
        y(c) = u(rng);
    }
    EXPECT_LT(fit_readout(s, y, 1e12).norm(), 1e-9);
    EXPECT_GT(fit_readout(s, y, 1e-6).norm(), 1e-3);
}

TEST(Readout, SingularWithoutRidge) {
    Eigen::MatrixXd s(3, 10);
    s.setRandom();
    s.row(2) = s.row(1);
    Eigen::RowVectorXd y = Eigen::RowVectorXd::Random(10);
    try {
        fit_readout(s, y, 0.0);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("lambda > 0"), std::string::npos);
    }
    EXPECT_NO_THROW(fit_readout(s, y, 1e-3));
}

TEST(Readout, WashoutColumnsIgnored) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Random(4, 60);
    Eigen::RowVectorXd y = Eigen::RowVectorXd::Random(60);
    const auto base = fit_readout(s.rightCols(50), y.tail(50), 1e-3);
    s.leftCols(10).setConstant(1e6);
    EXPECT_TRUE(fit_readout(s, y, 1e-3, 10).isApprox(base, 1e-14));
    EXPECT_THROW(fit_readout(s, y, 1e-3, 60), ValidationError);
    EXPECT_THROW(fit_readout(s, y.head(59), 1e-3), ValidationError);
}

// Collected states of the default reservoir on a 200-step sequence.
std::pair<Eigen::MatrixXd, Eigen::RowVectorXd> reservoir_states(std::uint64_t seed) {
    EsnConfig c;
    c.seed = seed;
    auto r = init_reservoir(c);
    EsnModel m{c, FeatureNorm{3.0, 0.3, 0.0, 0.05}, r.w_in, r.w, {}};
    const auto eda = synthetic_eda(seed, 201);
    Featurizer f(m.norm);
    EsnState st = initial_state(m);
    Eigen::MatrixXd s(103, 200);
    Eigen::RowVectorXd y(200);
    int col = 0;
    for (double e : eda) {
        const auto u = f.push(e);
        if (!u) continue;
        esn_step(m, st, *u);
        s.col(col) = readout_input(*u, st.x);
        y(col) = 0.5 + 0.4 * std::tanh(e - 3.0);
        ++col;
    }
    return {s, y};
}

TEST(Readout, MatchesLongDoubleNormalEquations) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto [s, y] = reservoir_states(seed);
        const auto w = fit_readout(s, y, 1e-4);
        const auto oracle = ridge_oracle(s, y, 1e-4);
        long double diff = 0, ref = 0;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            diff += (w(i) - oracle[static_cast<std::size_t>(i)]) * (w(i) - oracle[static_cast<std::size_t>(i)]);
            ref += oracle[static_cast<std::size_t>(i)] * oracle[static_cast<std::size_t>(i)];
        }
        EXPECT_LE(std::sqrt(static_cast<double>(diff / ref)), 1e-8) << seed;
    }
}

std::vector<Sequence> toy_sequences(int count, std::uint64_t seed) {
    std::vector<Sequence> out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 0.02);
    for (int k = 0; k < count; ++k) {
        Sequence s;
        double stress = 0.2;
        for (int i = 0; i < 600; ++i) {
            stress = std::clamp(stress + ((i / 120 + k) % 2 ? 0.004 : -0.004), 0.0, 1.0);
            s.label.push_back(stress);
            s.eda.push_back(2.0 + 4.0 * stress + g(rng));
        }
        out.push_back(std::move(s));
    }
    return out;
}

TEST(Training, LearnsAffineToyAndIsDeterministic) {
    EsnConfig c;
    c.seed = 5;
    TrainReport report;
    const auto a = train_esn(toy_sequences(4, 1), c, &report);
    const auto b = train_esn(toy_sequences(4, 1), c);
    EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
    EXPECT_GT(report.train_corr, 0.95);
    EXPECT_EQ(report.columns, 4u * (599 - 80));
    EXPECT_GT(evaluate(a, toy_sequences(2, 9)).corr, 0.95);
}

TEST(Streaming, MatchesBatchExactly) {
    EsnConfig c;
    c.seed = 8;
    const auto model = train_esn(toy_sequences(3, 2), c);
    const auto seq = toy_sequences(1, 3).front();
    const auto batch = predict_sequence(model, seq.eda);
    StressEstimator est(model);
    for (std::size_t i = 0; i < seq.eda.size(); ++i) {
        const auto out = est.push(0.25 * static_cast<double>(i), seq.eda[i]);
        ASSERT_EQ(out.has_value(), batch[i].has_value()) << i;
        if (batch[i]) {
            ASSERT_EQ(*est.last_raw(), *batch[i]) << i;
        }
    }
}

TEST(Streaming, EmaHalfLifeAndFaults) {
    auto m = tiny_model(2);
    m.config.leak = 1.0;
    m.norm = {0.0, 1.0, 0.0, 1.0};
    m.w_out(0) = 0.5;
    m.w_out(1) = 0.25;  // raw = 0.5 + 0.25 * eda while |eda| small
    StressEstimator est(m, 2.0);
    est.push(0.0, 0.0);
    EXPECT_DOUBLE_EQ(*est.push(0.25, 0.0), 0.5);
    std::optional<double> out;
    for (int i = 0; i < 8; ++i) out = est.push(0.5 + 0.25 * i, -2.0);
    EXPECT_NEAR(*out, 0.25, 1e-12);
    EXPECT_EQ(*est.last_raw(), 0.0);

    const auto seen = est.state().samples_seen;
    EXPECT_FALSE(est.push(3.0, std::nan("")).has_value());
    EXPECT_EQ(est.faults(), 1);
    EXPECT_EQ(est.state().samples_seen, seen);
}

TEST(Serialize, RoundTripAndChecks) {
    EsnConfig c;
    c.seed = 6;
    const auto model = train_esn(toy_sequences(2, 4), c);
    const auto doc = model_to_json(model);
    const auto back = model_from_json(json::parse(doc.dump()));
    EXPECT_EQ(back.config, model.config);
    EXPECT_EQ(back.norm, model.norm);
    EXPECT_TRUE(back.w_in == model.w_in);
    EXPECT_TRUE(back.w_out == model.w_out);
    EXPECT_TRUE(Eigen::MatrixXd(back.w) == Eigen::MatrixXd(model.w));

    auto bad = doc;
    bad["version"] = 99;
    EXPECT_THROW(model_from_json(bad), ValidationError);
    bad = doc;
    bad["norm"]["eda_std"] = 0.0;
    EXPECT_THROW(model_from_json(bad), ValidationError);
    bad = doc;
    bad["weights"]["w"]["triplets"][0][2] = bad["weights"]["w"]["triplets"][0][2].get<double>() + 5.0;
    EXPECT_THROW(model_from_json(bad), ValidationError);
    bad = doc;
    bad["weights"]["w_out"][0].erase(0);
    EXPECT_THROW(model_from_json(bad), ValidationError);
}

TEST(Serialize, ConfigOverlay) {
    const auto c = config_from_json(json{{"n_reservoir", 50}, {"ridge", 0.1}});
    EXPECT_EQ(c.n_reservoir, 50);
    EXPECT_EQ(c.ridge, 0.1);
    EXPECT_EQ(c.washout, 80);
    EXPECT_THROW(config_from_json(json{{"reservoir", 50}}), ValidationError);
    EXPECT_THROW(config_from_json(json{{"leak", "fast"}}), ValidationError);
    EXPECT_THROW(config_from_json(json{{"spectral_radius", 1.2}}), ValidationError);
}

}  // namespace
}  // namespace teach::esn
