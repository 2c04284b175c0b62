#include "teach/agent/network.hpp"

#include "teach/common/error.hpp"

#include <cmath>

namespace teach::agent {

Mlp Mlp::zeros(int inputs, int hidden, int outputs) {
    return {Eigen::MatrixXd::Zero(hidden, inputs), Eigen::VectorXd::Zero(hidden),
            Eigen::MatrixXd::Zero(outputs, hidden), Eigen::VectorXd::Zero(outputs)};
}

Mlp Mlp::uniform(int inputs, int hidden, int outputs, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Mlp m = zeros(inputs, hidden, outputs);
    Eigen::VectorXd flat(m.size());
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = u(rng);
    m.assign(flat);
    return m;
}

bool Mlp::all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

Eigen::VectorXd Mlp::flatten() const {
    Eigen::VectorXd flat(size());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < w1.cols(); ++j)
        for (Eigen::Index i = 0; i < w1.rows(); ++i) flat(k++) = w1(i, j);
    for (Eigen::Index i = 0; i < b1.size(); ++i) flat(k++) = b1(i);
    for (Eigen::Index j = 0; j < w2.cols(); ++j)
        for (Eigen::Index i = 0; i < w2.rows(); ++i) flat(k++) = w2(i, j);
    for (Eigen::Index i = 0; i < b2.size(); ++i) flat(k++) = b2(i);
    return flat;
}

void Mlp::assign(const Eigen::VectorXd& flat) {
    if (flat.size() != size()) {
        throw ValidationError("parameter vector has the wrong length");
    }
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < w1.cols(); ++j)
        for (Eigen::Index i = 0; i < w1.rows(); ++i) w1(i, j) = flat(k++);
    for (Eigen::Index i = 0; i < b1.size(); ++i) b1(i) = flat(k++);
    for (Eigen::Index j = 0; j < w2.cols(); ++j)
        for (Eigen::Index i = 0; i < w2.rows(); ++i) w2(i, j) = flat(k++);
    for (Eigen::Index i = 0; i < b2.size(); ++i) b2(i) = flat(k++);
}

Mlp& Mlp::operator+=(const Mlp& o) {
    w1 += o.w1;
    b1 += o.b1;
    w2 += o.w2;
    b2 += o.b2;
    return *this;
}

Mlp& Mlp::operator*=(double k) {
    w1 *= k;
    b1 *= k;
    w2 *= k;
    b2 *= k;
    return *this;
}

bool operator==(const Mlp& a, const Mlp& b) {
    return a.w1.rows() == b.w1.rows() && a.w1.cols() == b.w1.cols() && a.w2.rows() == b.w2.rows() &&
           a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
}

Activations forward(const Mlp& net, const Eigen::VectorXd& x) {
    if (x.size() != net.w1.cols()) {
        throw ValidationError("network input has the wrong size");
    }
    Activations a;
    a.hidden = (net.w1 * x + net.b1).array().tanh().matrix();
    a.out = net.w2 * a.hidden + net.b2;
    return a;
}

Mlp backward(const Mlp& net, const Eigen::VectorXd& x, const Activations& act, const Eigen::VectorXd& g) {
    Mlp grad;
    grad.w2 = g * act.hidden.transpose();
    grad.b2 = g;
    const Eigen::VectorXd dz = ((net.w2.transpose() * g).array() * (1.0 - act.hidden.array().square())).matrix();
    grad.w1 = dz * x.transpose();
    grad.b1 = dz;
    return grad;
}

Probs softmax(const Eigen::Vector3d& logits) {
    const Eigen::Vector3d e = (logits.array() - logits.maxCoeff()).exp().matrix();
    return e / e.sum();
}

double entropy(const Probs& p) {
    double h = 0;
    for (int i = 0; i < kNumActions; ++i) {
        if (p(i) > 0) h -= p(i) * std::log(p(i));
    }
    return h;
}

Eigen::Vector3d dlogpi_dlogits(const Probs& p, int action) {
    Eigen::Vector3d g = -p;
    g(action) += 1.0;
    return g;
}

Eigen::Vector3d dentropy_dlogits(const Probs& p) {
    const double h = entropy(p);
    Eigen::Vector3d g;
    for (int i = 0; i < kNumActions; ++i) {
        g(i) = p(i) > 0 ? -p(i) * (std::log(p(i)) + h) : 0.0;
    }
    return g;
}

}  // namespace teach::agent
