#pragma once

#include <Eigen/Dense>

#include <array>
#include <random>

namespace teach::agent {

inline constexpr int kNumFeatures = 5;
inline constexpr int kNumActions = 3;

using Features = Eigen::Matrix<double, kNumFeatures, 1>;
using Probs = Eigen::Vector3d;

/// One hidden tanh layer: out = W2 tanh(W1 x + b1) + b2.
struct Mlp {
    Eigen::MatrixXd w1;  // hidden x inputs
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // outputs x hidden
    Eigen::VectorXd b2;

    static Mlp zeros(int inputs, int hidden, int outputs);
    static Mlp uniform(int inputs, int hidden, int outputs, double scale, std::mt19937_64& rng);

    Eigen::Index size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
    bool all_finite() const;

    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);

    Mlp& operator+=(const Mlp& other);
    Mlp& operator*=(double k);
    friend bool operator==(const Mlp& a, const Mlp& b);
};

struct Activations {
    Eigen::VectorXd hidden;
    Eigen::VectorXd out;
};

Activations forward(const Mlp& net, const Eigen::VectorXd& x);

/// Gradient of g . out with respect to every parameter.
Mlp backward(const Mlp& net, const Eigen::VectorXd& x, const Activations& act, const Eigen::VectorXd& g);

/// Max-shifted softmax.
Probs softmax(const Eigen::Vector3d& logits);

/// -sum p log p, with 0 log 0 = 0.
double entropy(const Probs& p);

/// d log softmax(z)_a / dz = e_a - p.
Eigen::Vector3d dlogpi_dlogits(const Probs& p, int action);

/// dH / dz_j = -p_j (log p_j + H).
Eigen::Vector3d dentropy_dlogits(const Probs& p);

}  // namespace teach::agent
