#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "dispat/autodiff.hpp"
#include "dispat/errors.hpp"
#include "dispat/tensor.hpp"

namespace dispat {

/// Adam with bias correction. Moment buffers are keyed by parameter name so
/// they survive checkpointing; step() consumes the gradients currently in the
/// store and zeroes them afterwards.
class Adam {
public:
    struct Slot {
        Tensor m;
        Tensor v;
    };

    explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (auto& p : params) {
            if (!all_finite(p.grad)) throw NumericError("Adam: non-finite gradient for parameter " + p.name);
            Slot& s = slot_for(p);
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double g = p.grad.data()[k];
                double& m = s.m.data()[k];
                double& v = s.v.data()[k];
                m = beta1_ * m + (1.0 - beta1_) * g;
                v = beta2_ * v + (1.0 - beta2_) * g * g;
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.value.data()[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
        params.zero_grads();
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }
    double eps() const { return eps_; }
    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }

    /// Moment access for checkpointing. Creates the slot if absent.
    Slot& slot_for(const Parameter& p) {
        auto it = slots_.find(p.name);
        if (it == slots_.end()) {
            Slot s{Tensor(p.value.rows(), p.value.cols()), Tensor(p.value.rows(), p.value.cols())};
            it = slots_.emplace(p.name, std::move(s)).first;
        } else {
            if (!it->second.m.same_shape(p.value))
                throw ShapeError("Adam: moment shape mismatch for parameter " + p.name);
        }
        return it->second;
    }

    bool has_slot(const std::string& name) const { return slots_.count(name) != 0; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
    std::unordered_map<std::string, Slot> slots_;
};

} // namespace dispat
