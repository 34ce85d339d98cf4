#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvgc/model/model.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/numeric/rng.hpp"
#include "mvgc/train/backprop.hpp"

namespace mvgc {

struct gradcheck_options {
    real step = 1e-5;
    real tolerance = 1e-4;
    /// Denominator floor, so all-zero gradients compare in absolute terms.
    real magnitude_floor = 1e-6;
    std::size_t max_coordinates = 500;  // per group; larger groups are subsampled
    std::uint64_t seed = 0;
};

/// Per-group agreement. `relative_error` is the norm-wise relative difference
/// ||analytic - numeric|| / max(||analytic||, ||numeric||) over the checked
/// coordinates and decides pass/fail. `max_coordinate_error` is the worst
/// coordinate-wise ratio; it is dominated by round-off on coordinates whose
/// gradient is near the finite-difference noise level (about 1e-10 at
/// step 1e-5) and is reported for diagnosis only.
struct gradcheck_group {
    std::string name;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // probes that crossed a ReLU/argmax switch
    real relative_error = 0.0;
    real max_coordinate_error = 0.0;
    real max_abs_gradient = 0.0;
    bool passed = true;
};

struct gradcheck_report {
    std::vector<gradcheck_group> groups;
    bool passed = true;

    real worst() const {
        real w = 0.0;
        for (const auto& g : groups) w = std::max(w, g.relative_error);
        return w;
    }
};

/// Bytes recording every discrete choice of a forward pass: ReLU masks,
/// pooling winners, dominant views, metric argmax positions, readout argmax.
/// Central differences are only meaningful when all three probes agree.
///
/// Readout winners are recorded as the lowest row within round-off of the
/// column max: automorphic vertices carry identical values for every
/// parameter setting, so switching between them is not a kink.
inline std::string structure_signature(const forward_trace& t) {
    std::string sig;
    auto put = [&](std::int64_t v) { sig.append(reinterpret_cast<const char*>(&v), sizeof v); };
    for (const auto& b : t.blocks) {
        for (Eigen::Index i = 0; i < b.pre_activation.size(); ++i) sig.push_back(b.pre_activation.data()[i] > 0.0 ? '1' : '0');
        for (Eigen::Index i = 0; i < b.pool.argmax_view.size(); ++i) put(b.pool.argmax_view.data()[i]);
        put(static_cast<std::int64_t>(b.pool.dominant_index));
        for (Eigen::Index i = 0; i < b.l_next.argmax_view.size(); ++i) put(b.l_next.argmax_view.data()[i]);
        for (const auto& v : b.conv.views) {
            put(v.metric.max_row);
            put(v.metric.max_col);
        }
    }
    const auto& y = t.blocks.back().output;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const real top = y.col(j).maxCoeff();
        const real slack = 1e-12 * std::max(1.0, std::abs(top));
        Eigen::Index first = 0;
        while (y(first, j) < top - slack) ++first;
        put(first);
    }
    for (Eigen::Index i = 0; i < t.hidden_pre.size(); ++i) sig.push_back(t.hidden_pre[i] > 0.0 ? '1' : '0');
    return sig;
}

/// Compares analytic gradients with central differences, per parameter group.
/// Runs in inference mode (no dropout) with lambda_max and sigma frozen at the
/// values of the unperturbed pass.
inline gradcheck_report finite_difference_check(const model& m, const graph& g, const gradcheck_options& opt = {}) {
    const auto base = forward(m, g, {});
    const auto constants = base.constants();
    const auto signature = structure_signature(base);
    const auto analytic = backpropagate(m, g, base);

    model probe = m;
    auto params = parameters(probe);
    const auto grads = parameters(analytic.grads);

    struct coordinate {
        std::size_t tensor;
        Eigen::Index offset;
    };
    std::map<std::string, std::vector<coordinate>> by_group;
    std::vector<std::string> order;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!by_group.contains(params[p].group)) order.push_back(params[p].group);
        auto& coords = by_group[params[p].group];
        for (Eigen::Index i = 0; i < params[p].size(); ++i) coords.push_back({p, i});
    }

    auto loss_at = [&](bool& same_structure) {
        const auto t = forward(probe, g, {false, nullptr, &constants});
        same_structure = structure_signature(t) == signature;
        return trace_loss(t, g.label);
    };

    rng sampler(opt.seed);
    gradcheck_report report;
    for (const auto& name : order) {
        auto coords = by_group[name];
        if (coords.size() > opt.max_coordinates) {
            sampler.shuffle(coords);
            coords.resize(opt.max_coordinates);
        }
        gradcheck_group grp;
        grp.name = name;
        real diff_sq = 0.0, exact_sq = 0.0, numeric_sq = 0.0;
        for (const auto& c : coords) {
            real& value = params[c.tensor].data[c.offset];
            const real original = value;
            bool plus_ok = false, minus_ok = false;
            value = original + opt.step;
            const real f_plus = loss_at(plus_ok);
            value = original - opt.step;
            const real f_minus = loss_at(minus_ok);
            value = original;
            if (!plus_ok || !minus_ok) {
                ++grp.skipped;
                continue;
            }
            const real numeric = (f_plus - f_minus) / (2.0 * opt.step);
            const real exact = grads[c.tensor].data[c.offset];
            const real scale = std::max({std::abs(numeric), std::abs(exact), opt.magnitude_floor});
            grp.max_coordinate_error = std::max(grp.max_coordinate_error, std::abs(numeric - exact) / scale);
            diff_sq += (numeric - exact) * (numeric - exact);
            exact_sq += exact * exact;
            numeric_sq += numeric * numeric;
            grp.max_abs_gradient = std::max(grp.max_abs_gradient, std::abs(exact));
            ++grp.checked;
        }
        grp.relative_error =
            std::sqrt(diff_sq) / std::max({std::sqrt(exact_sq), std::sqrt(numeric_sq), opt.magnitude_floor});
        grp.passed = grp.relative_error < opt.tolerance;
        report.passed = report.passed && grp.passed;
        report.groups.push_back(std::move(grp));
    }
    return report;
}

}  // namespace mvgc
