#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dispat/autodiff.hpp"
#include "dispat/tensor.hpp"

namespace dispat {

/// One compared coordinate: analytic vs central-difference derivative.
struct GradCheckEntry {
    std::string param;
    int row = 0;
    int col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    std::string worst_param;

    bool ok(double tol) const { return max_rel_err < tol; }
};

/// Relative error with an absolute floor so near-zero derivative pairs do not
/// blow the ratio up: |a-n| / max(1, |a|+|n|).
inline double grad_rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
}

/// Central-difference check of d(loss)/d(theta) for every coordinate of every
/// parameter in the store. `loss_fn` must rebuild the forward pass from the
/// current parameter values and return the scalar loss; it is called twice per
/// coordinate plus once for the analytic pass.
inline GradCheckReport grad_check(ParamStore& params,
                                  const std::function<double(bool with_grad)>& loss_fn,
                                  double h = 1e-5) {
    params.zero_grads();
    loss_fn(true); // analytic gradients land in params.grad

    GradCheckReport report;
    for (auto& p : params) {
        for (int i = 0; i < p.value.rows(); ++i) {
            for (int j = 0; j < p.value.cols(); ++j) {
                const double saved = p.value.at(i, j);
                p.value.at(i, j) = saved + h;
                const double up = loss_fn(false);
                p.value.at(i, j) = saved - h;
                const double dn = loss_fn(false);
                p.value.at(i, j) = saved;

                GradCheckEntry e;
                e.param = p.name;
                e.row = i;
                e.col = j;
                e.analytic = p.grad.at(i, j);
                e.numeric = (up - dn) / (2.0 * h);
                e.rel_err = grad_rel_err(e.analytic, e.numeric);
                if (e.rel_err > report.max_rel_err) {
                    report.max_rel_err = e.rel_err;
                    report.worst_param = e.param;
                }
                report.entries.push_back(std::move(e));
            }
        }
    }
    return report;
}

} // namespace dispat
