#include "teach/esn/serialize.hpp"

#include "teach/common/error.hpp"
#include "teach/esn/spectral.hpp"

#include <cmath>

namespace teach::esn {
namespace {

json dense(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd dense_from(const json& doc, const char* name) {
    if (!doc.is_array() || doc.empty() || !doc.front().is_array()) {
        throw ValidationError(std::string("weights.") + name + " must be a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(doc.size());
    const auto cols = static_cast<Eigen::Index>(doc.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = doc[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError(std::string("weights.") + name + " rows differ in length");
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto& v = row[static_cast<std::size_t>(j)];
            if (!v.is_number()) throw ValidationError(std::string("weights.") + name + " holds a non-number");
            m(i, j) = v.get<double>();
        }
    }
    if (!m.allFinite()) {
        throw ValidationError(std::string("weights.") + name + " holds non-finite values");
    }
    return m;
}

}  // namespace

json to_json(const EsnConfig& c) {
    return {{"n_reservoir", c.n_reservoir}, {"spectral_radius", c.spectral_radius},
            {"leak", c.leak},               {"input_scaling", c.input_scaling},
            {"density", c.density},         {"ridge", c.ridge},
            {"washout", c.washout},         {"seed", c.seed}};
}

EsnConfig config_from_json(const json& doc, EsnConfig c) {
    check_keys(doc, {"n_reservoir", "spectral_radius", "leak", "input_scaling", "density", "ridge", "washout", "seed"},
               "esn config");
    read_optional(doc, "n_reservoir", c.n_reservoir);
    read_optional(doc, "spectral_radius", c.spectral_radius);
    read_optional(doc, "leak", c.leak);
    read_optional(doc, "input_scaling", c.input_scaling);
    read_optional(doc, "density", c.density);
    read_optional(doc, "ridge", c.ridge);
    read_optional(doc, "washout", c.washout);
    read_optional(doc, "seed", c.seed);
    validate(c);
    return c;
}

json model_to_json(const EsnModel& m) {
    json triplets = json::array();
    for (int k = 0; k < m.w.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m.w, k); it; ++it) {
            triplets.push_back({it.row(), it.col(), it.value()});
        }
    }
    return {
        {"kind", "esn"},
        {"version", kModelVersion},
        {"config", to_json(m.config)},
        {"norm",
         {{"eda_mean", m.norm.eda_mean},
          {"eda_std", m.norm.eda_std},
          {"diff_mean", m.norm.diff_mean},
          {"diff_std", m.norm.diff_std}}},
        {"weights",
         {{"w_in", dense(m.w_in)},
          {"w", {{"rows", m.w.rows()}, {"cols", m.w.cols()}, {"triplets", std::move(triplets)}}},
          {"w_out", dense(m.w_out)}}},
    };
}

EsnModel model_from_json(const json& doc) {
    if (require(doc, "kind") != "esn") {
        throw ValidationError("artifact kind is not \"esn\"");
    }
    if (require(doc, "version") != kModelVersion) {
        throw ValidationError("unsupported esn model version " + require(doc, "version").dump());
    }
    EsnModel m;
    m.config = config_from_json(require(doc, "config"));
    const auto& norm = require(doc, "norm");
    m.norm = {require_number(norm, "eda_mean"), require_number(norm, "eda_std"), require_number(norm, "diff_mean"),
              require_number(norm, "diff_std")};
    validate(m.norm);

    const auto& weights = require(doc, "weights");
    const Eigen::Index n = m.config.n_reservoir;
    m.w_in = dense_from(require(weights, "w_in"), "w_in");
    if (m.w_in.rows() != n || m.w_in.cols() != 1 + kNumInputs) {
        throw ValidationError("weights.w_in has the wrong shape");
    }
    const Eigen::MatrixXd w_out = dense_from(require(weights, "w_out"), "w_out");
    if (w_out.rows() != 1 || w_out.cols() != 1 + kNumInputs + n) {
        throw ValidationError("weights.w_out has the wrong shape");
    }
    m.w_out = w_out.row(0);

    const auto& w = require(weights, "w");
    if (require_number(w, "rows") != static_cast<double>(n) || require_number(w, "cols") != static_cast<double>(n)) {
        throw ValidationError("weights.w has the wrong shape");
    }
    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& t : require(w, "triplets")) {
        if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() || !t[1].is_number_integer() ||
            !t[2].is_number()) {
            throw ValidationError("weights.w triplets must be [row, col, value]");
        }
        const auto i = t[0].get<long long>();
        const auto j = t[1].get<long long>();
        const double v = t[2].get<double>();
        if (i < 0 || i >= n || j < 0 || j >= n || !std::isfinite(v)) {
            throw ValidationError("weights.w triplet out of range");
        }
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    }
    m.w.resize(n, n);
    m.w.setFromTriplets(triplets.begin(), triplets.end());
    m.w.makeCompressed();

    const double rho = spectral_radius(m.w).radius;
    if (std::abs(rho - m.config.spectral_radius) > 1e-6) {
        throw ValidationError("stored reservoir spectral radius " + std::to_string(rho) +
                              " does not match the configured value");
    }
    return m;
}

}  // namespace teach::esn
