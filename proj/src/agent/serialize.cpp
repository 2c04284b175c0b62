#include "teach/agent/serialize.hpp"

#include "teach/common/error.hpp"

#include <cmath>

namespace teach::agent {
namespace {

json matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

double number(const json& v, const std::string& name) {
    if (!v.is_number()) throw ValidationError(name + " holds a non-number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(name + " holds a non-finite value");
    return x;
}

Eigen::MatrixXd matrix_from(const json& doc, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (!doc.is_array() || static_cast<Eigen::Index>(doc.size()) != rows) {
        throw ValidationError(name + " must have " + std::to_string(rows) + " rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = doc[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError(name + " must have " + std::to_string(cols) + " columns");
        }
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = number(row[static_cast<std::size_t>(j)], name);
    }
    return m;
}

Eigen::VectorXd vector_from(const json& doc, const std::string& name, Eigen::Index size) {
    if (!doc.is_array() || static_cast<Eigen::Index>(doc.size()) != size) {
        throw ValidationError(name + " must have " + std::to_string(size) + " entries");
    }
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = number(doc[static_cast<std::size_t>(i)], name);
    return v;
}

}  // namespace

json to_json(const AgentConfig& c) {
    return {{"hidden", c.hidden},
            {"lr_policy", c.lr_policy},
            {"lr_value", c.lr_value},
            {"gamma", c.gamma},
            {"entropy_weight", c.entropy_weight},
            {"beta", c.beta},
            {"d_ref", c.d_ref},
            {"init_scale", c.init_scale},
            {"epoch", c.epoch},
            {"preview", c.preview},
            {"seed", c.seed}};
}

AgentConfig config_from_json(const json& doc, AgentConfig c) {
    check_keys(doc,
               {"hidden", "lr_policy", "lr_value", "gamma", "entropy_weight", "beta", "d_ref", "init_scale", "epoch",
                "preview", "seed"},
               "agent config");
    read_optional(doc, "hidden", c.hidden);
    read_optional(doc, "lr_policy", c.lr_policy);
    read_optional(doc, "lr_value", c.lr_value);
    read_optional(doc, "gamma", c.gamma);
    read_optional(doc, "entropy_weight", c.entropy_weight);
    read_optional(doc, "beta", c.beta);
    read_optional(doc, "d_ref", c.d_ref);
    read_optional(doc, "init_scale", c.init_scale);
    read_optional(doc, "epoch", c.epoch);
    read_optional(doc, "preview", c.preview);
    read_optional(doc, "seed", c.seed);
    validate(c);
    return c;
}

json to_json(const Mlp& net) {
    return {{"w1", matrix(net.w1)}, {"b1", vector(net.b1)}, {"w2", matrix(net.w2)}, {"b2", vector(net.b2)}};
}

Mlp mlp_from_json(const json& doc, int inputs, int hidden, int outputs) {
    Mlp m;
    m.w1 = matrix_from(require(doc, "w1"), "w1", hidden, inputs);
    m.b1 = vector_from(require(doc, "b1"), "b1", hidden);
    m.w2 = matrix_from(require(doc, "w2"), "w2", outputs, hidden);
    m.b2 = vector_from(require(doc, "b2"), "b2", outputs);
    return m;
}

json model_to_json(const AgentConfig& config, const Params& params) {
    return {{"kind", "agent"},
            {"version", kModelVersion},
            {"config", to_json(config)},
            {"policy", to_json(params.policy)},
            {"value", to_json(params.value)}};
}

std::pair<AgentConfig, Params> model_from_json(const json& doc) {
    if (require(doc, "kind") != "agent") {
        throw ValidationError("artifact kind is not \"agent\"");
    }
    if (require(doc, "version") != kModelVersion) {
        throw ValidationError("unsupported agent model version " + require(doc, "version").dump());
    }
    const auto config = config_from_json(require(doc, "config"));
    Params p;
    p.policy = mlp_from_json(require(doc, "policy"), kNumFeatures, config.hidden, kNumActions);
    p.value = mlp_from_json(require(doc, "value"), kNumFeatures, config.hidden, 1);
    return {config, std::move(p)};
}

}  // namespace teach::agent
