#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dispat/errors.hpp"
#include "dispat/rng.hpp"
#include "dispat/tensor.hpp"

namespace dispat {

/// Learnable tensor with a persistent gradient accumulator. Lives in a
/// ParamStore across steps; the tape only borrows it.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad; // same shape as value, zeroed between steps

    Parameter(std::string n, int rows, int cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols) {
        value.requires_grad = true;
    }
};

/// Name-indexed parameter collection. Names are unique; iteration order is
/// creation order, which checkpointing and the optimizer both rely on.
class ParamStore {
public:
    Parameter& create(const std::string& name, int rows, int cols) {
        if (index_.count(name)) throw ConfigError("ParamStore: duplicate parameter name: " + name);
        index_[name] = static_cast<int>(params_.size());
        params_.emplace_back(name, rows, cols);
        return params_.back();
    }

    Parameter& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("ParamStore: no parameter named " + name);
        return params_[it->second];
    }

    const Parameter& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("ParamStore: no parameter named " + name);
        return params_[it->second];
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grads() {
        for (auto& p : params_) p.grad.fill(0.0);
    }

private:
    std::deque<Parameter> params_; // deque keeps addresses stable
    std::unordered_map<std::string, int> index_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; invalid after the tape resets.
class Var {
public:
    Var() = default;
    const Tensor& val() const;
    int rows() const { return val().rows(); }
    int cols() const { return val().cols(); }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Records every forward operation so the reverse pass can replay exact
/// analytic gradients. Creation order is a topological order, so backward is
/// a single reverse sweep. One tape is single-threaded by construction.
class Tape {
public:
    Var constant(Tensor v) {
        return push(std::move(v), false, nullptr, "constant");
    }

    /// Leaf whose reverse pass accumulates into p.grad. Registering the same
    /// parameter several times is fine; contributions add up.
    Var leaf(Parameter& p) {
        const int id = next_id();
        Parameter* pp = &p;
        Var out = push(p.value, true, [this, id, pp] {
            const Tensor& g = nodes_[id].grad;
            for (std::size_t k = 0; k < g.size(); ++k) pp->grad.data()[k] += g.data()[k];
        }, "leaf");
        return out;
    }

    // ---- elementwise and broadcast arithmetic ----

    Var add(Var a, Var b) { return binary_bcast(a, b, "add", /*mul=*/false); }
    Var hadamard(Var a, Var b) { return binary_bcast(a, b, "hadamard", /*mul=*/true); }

    /// alpha * a + beta, elementwise, with constant coefficients.
    Var affine(Var a, double alpha, double beta) {
        const Tensor& av = val_of(a);
        Tensor out(av.rows(), av.cols());
        for (std::size_t k = 0; k < av.size(); ++k) out.data()[k] = alpha * av.data()[k] + beta;
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_, alpha] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            Tensor& ga = nodes_[ai].grad;
            for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] += alpha * g.data()[k];
        }, "affine");
    }

    Var scale(Var a, double c) { return affine(a, c, 0.0); }

    Var matmul(Var a, Var b) {
        const Tensor& av = val_of(a);
        const Tensor& bv = val_of(b);
        if (av.cols() != bv.rows()) throw ShapeError("matmul: inner extents differ");
        Tensor out(av.rows(), bv.cols());
        gemm_nn(av, bv, out);
        const int oid = next_id();
        return push(std::move(out), req(a) || req(b), [this, oid, ai = a.id_, bi = b.id_] {
            const Tensor& g = nodes_[oid].grad;
            if (nodes_[ai].requires_grad) gemm_nt(g, nodes_[bi].value, nodes_[ai].grad); // dA += g * B^T
            if (nodes_[bi].requires_grad) gemm_tn(nodes_[ai].value, g, nodes_[bi].grad); // dB += A^T * g
        }, "matmul");
    }

    Var transpose(Var a) {
        const Tensor& av = val_of(a);
        Tensor out(av.cols(), av.rows());
        for (int i = 0; i < av.rows(); ++i)
            for (int j = 0; j < av.cols(); ++j) out.at(j, i) = av.at(i, j);
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            Tensor& ga = nodes_[ai].grad;
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
        }, "transpose");
    }

    Var relu(Var a) {
        const Tensor& av = val_of(a);
        Tensor out(av.rows(), av.cols());
        for (std::size_t k = 0; k < av.size(); ++k) out.data()[k] = av.data()[k] > 0.0 ? av.data()[k] : 0.0;
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            const Tensor& x = nodes_[ai].value;
            Tensor& ga = nodes_[ai].grad;
            for (std::size_t k = 0; k < g.size(); ++k)
                if (x.data()[k] > 0.0) ga.data()[k] += g.data()[k];
        }, "relu");
    }

    Var sigmoid(Var a) {
        const Tensor& av = val_of(a);
        Tensor out(av.rows(), av.cols());
        for (std::size_t k = 0; k < av.size(); ++k) out.data()[k] = 1.0 / (1.0 + std::exp(-av.data()[k]));
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            const Tensor& y = nodes_[oid].value;
            Tensor& ga = nodes_[ai].grad;
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double s = y.data()[k];
                ga.data()[k] += g.data()[k] * s * (1.0 - s);
            }
        }, "sigmoid");
    }

    /// Row-wise softmax with max-shift. Output rows sum to 1.
    Var softmax_row(Var a) {
        const Tensor& av = val_of(a);
        Tensor out(av.rows(), av.cols());
        for (int i = 0; i < av.rows(); ++i) {
            double mx = av.at(i, 0);
            for (int j = 1; j < av.cols(); ++j) mx = std::max(mx, av.at(i, j));
            double z = 0.0;
            for (int j = 0; j < av.cols(); ++j) {
                const double e = std::exp(av.at(i, j) - mx);
                out.at(i, j) = e;
                z += e;
            }
            for (int j = 0; j < av.cols(); ++j) out.at(i, j) /= z;
        }
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            const Tensor& y = nodes_[oid].value;
            Tensor& ga = nodes_[ai].grad;
            for (int i = 0; i < g.rows(); ++i) {
                double s = 0.0;
                for (int j = 0; j < g.cols(); ++j) s += g.at(i, j) * y.at(i, j);
                for (int j = 0; j < g.cols(); ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - s);
            }
        }, "softmax_row");
    }

    /// Row-wise (x - mean) / sqrt(population variance + eps). No affine term.
    Var layer_norm_row(Var a, double eps = 1e-5) {
        const Tensor& av = val_of(a);
        const int n = av.cols();
        Tensor out(av.rows(), n);
        Tensor inv_sigma(av.rows(), 1);
        for (int i = 0; i < av.rows(); ++i) {
            double mu = 0.0;
            for (int j = 0; j < n; ++j) mu += av.at(i, j);
            mu /= n;
            double var = 0.0;
            for (int j = 0; j < n; ++j) {
                const double d = av.at(i, j) - mu;
                var += d * d;
            }
            var /= n;
            const double is = 1.0 / std::sqrt(var + eps);
            inv_sigma.at(i, 0) = is;
            for (int j = 0; j < n; ++j) out.at(i, j) = (av.at(i, j) - mu) * is;
        }
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_, inv_sigma = std::move(inv_sigma)] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            const Tensor& y = nodes_[oid].value; // y is the normalized output
            Tensor& ga = nodes_[ai].grad;
            const int n = g.cols();
            for (int i = 0; i < g.rows(); ++i) {
                double gm = 0.0, gym = 0.0;
                for (int j = 0; j < n; ++j) {
                    gm += g.at(i, j);
                    gym += g.at(i, j) * y.at(i, j);
                }
                gm /= n;
                gym /= n;
                const double is = inv_sigma.at(i, 0);
                for (int j = 0; j < n; ++j)
                    ga.at(i, j) += is * (g.at(i, j) - gm - y.at(i, j) * gym);
            }
        }, "layer_norm_row");
    }

    /// Concatenate along the last (column) axis.
    Var concat_last(Var a, Var b) {
        const Tensor& av = val_of(a);
        const Tensor& bv = val_of(b);
        if (av.rows() != bv.rows()) throw ShapeError("concat_last: row counts differ");
        Tensor out(av.rows(), av.cols() + bv.cols());
        for (int i = 0; i < av.rows(); ++i) {
            for (int j = 0; j < av.cols(); ++j) out.at(i, j) = av.at(i, j);
            for (int j = 0; j < bv.cols(); ++j) out.at(i, av.cols() + j) = bv.at(i, j);
        }
        const int oid = next_id();
        return push(std::move(out), req(a) || req(b), [this, oid, ai = a.id_, bi = b.id_, ac = av.cols()] {
            const Tensor& g = nodes_[oid].grad;
            if (nodes_[ai].requires_grad) {
                Tensor& ga = nodes_[ai].grad;
                for (int i = 0; i < ga.rows(); ++i)
                    for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, j);
            }
            if (nodes_[bi].requires_grad) {
                Tensor& gb = nodes_[bi].grad;
                for (int i = 0; i < gb.rows(); ++i)
                    for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, ac + j);
            }
        }, "concat_last");
    }

    Var slice_cols(Var a, int c0, int c1) {
        const Tensor& av = val_of(a);
        if (c0 < 0 || c1 > av.cols() || c0 >= c1) throw ShapeError("slice_cols: bad range");
        Tensor out(av.rows(), c1 - c0);
        for (int i = 0; i < av.rows(); ++i)
            for (int j = c0; j < c1; ++j) out.at(i, j - c0) = av.at(i, j);
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_, c0] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            Tensor& ga = nodes_[ai].grad;
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) ga.at(i, c0 + j) += g.at(i, j);
        }, "slice_cols");
    }

    Var sum_all(Var a) {
        const Tensor& av = val_of(a);
        double s = 0.0;
        for (std::size_t k = 0; k < av.size(); ++k) s += av.data()[k];
        const int oid = next_id();
        return push(Tensor::scalar(s), req(a), [this, oid, ai = a.id_] {
            if (!nodes_[ai].requires_grad) return;
            const double g = nodes_[oid].grad.at(0, 0);
            Tensor& ga = nodes_[ai].grad;
            for (std::size_t k = 0; k < ga.size(); ++k) ga.data()[k] += g;
        }, "sum_all");
    }

    Var log_elem(Var a) {
        const Tensor& av = val_of(a);
        Tensor out(av.rows(), av.cols());
        for (std::size_t k = 0; k < av.size(); ++k) out.data()[k] = std::log(av.data()[k]);
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            const Tensor& x = nodes_[ai].value;
            Tensor& ga = nodes_[ai].grad;
            for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] += g.data()[k] / x.data()[k];
        }, "log");
    }

    /// Clamp to [lo, hi]; gradient is zero where the clamp is active.
    Var clamp(Var a, double lo, double hi) {
        const Tensor& av = val_of(a);
        Tensor out(av.rows(), av.cols());
        for (std::size_t k = 0; k < av.size(); ++k) out.data()[k] = std::min(hi, std::max(lo, av.data()[k]));
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_, lo, hi] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            const Tensor& x = nodes_[ai].value;
            Tensor& ga = nodes_[ai].grad;
            for (std::size_t k = 0; k < g.size(); ++k)
                if (x.data()[k] > lo && x.data()[k] < hi) ga.data()[k] += g.data()[k];
        }, "clamp");
    }

    /// Cosine similarity of two 1xd row vectors, fused into one node. A
    /// zero-norm input produces value 0 with zero gradient; `degenerate`, when
    /// given, is set in that case.
    Var cosine(Var a, Var b, bool* degenerate = nullptr) {
        const Tensor& av = val_of(a);
        const Tensor& bv = val_of(b);
        if (av.rows() != 1 || bv.rows() != 1 || av.cols() != bv.cols())
            throw ShapeError("cosine: expects two 1xd rows of equal width");
        const double na = norm(av.row(0));
        const double nb = norm(bv.row(0));
        if (na == 0.0 || nb == 0.0) {
            if (degenerate) *degenerate = true;
            return constant(Tensor::scalar(0.0));
        }
        const double c = dot(av.row(0), bv.row(0)) / (na * nb);
        const int oid = next_id();
        return push(Tensor::scalar(c), req(a) || req(b), [this, oid, ai = a.id_, bi = b.id_, na, nb, c] {
            const double g = nodes_[oid].grad.at(0, 0);
            const Tensor& x = nodes_[ai].value;
            const Tensor& y = nodes_[bi].value;
            if (nodes_[ai].requires_grad) {
                Tensor& ga = nodes_[ai].grad;
                for (int j = 0; j < x.cols(); ++j)
                    ga.at(0, j) += g * (y.at(0, j) / (na * nb) - c * x.at(0, j) / (na * na));
            }
            if (nodes_[bi].requires_grad) {
                Tensor& gb = nodes_[bi].grad;
                for (int j = 0; j < y.cols(); ++j)
                    gb.at(0, j) += g * (x.at(0, j) / (na * nb) - c * y.at(0, j) / (nb * nb));
            }
        }, "cosine");
    }

    /// Inverted dropout: kept entries are scaled by 1/(1-rate). Draws one
    /// uniform per entry from `rng`, so call order is part of determinism.
    Var dropout(Var a, double rate, SplitMix64& rng) {
        if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
        const Tensor& av = val_of(a);
        const double keep = 1.0 - rate;
        Tensor mask(av.rows(), av.cols());
        for (std::size_t k = 0; k < mask.size(); ++k)
            mask.data()[k] = (rng.next_double() >= rate) ? 1.0 / keep : 0.0;
        Tensor out(av.rows(), av.cols());
        for (std::size_t k = 0; k < av.size(); ++k) out.data()[k] = av.data()[k] * mask.data()[k];
        const int oid = next_id();
        return push(std::move(out), req(a), [this, oid, ai = a.id_, mask = std::move(mask)] {
            if (!nodes_[ai].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            Tensor& ga = nodes_[ai].grad;
            for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] += g.data()[k] * mask.data()[k];
        }, "dropout");
    }

    /// Masked mean over rows: 1xd output, padded rows contribute nothing.
    Var mean_pool_rows(Var h, const std::vector<bool>& mask) {
        const Tensor& hv = val_of(h);
        if (static_cast<int>(mask.size()) != hv.rows()) throw ShapeError("mean_pool_rows: mask length != rows");
        int count = 0;
        for (bool m : mask)
            if (m) ++count;
        if (count == 0) throw EmptyPoolError("mean_pool_rows: empty mask");
        const double w = 1.0 / count;
        Tensor out(1, hv.cols());
        for (int i = 0; i < hv.rows(); ++i) {
            if (!mask[i]) continue;
            for (int j = 0; j < hv.cols(); ++j) out.at(0, j) += w * hv.at(i, j);
        }
        const int oid = next_id();
        return push(std::move(out), req(h), [this, oid, hi = h.id_, mask, w] {
            if (!nodes_[hi].requires_grad) return;
            const Tensor& g = nodes_[oid].grad;
            Tensor& gh = nodes_[hi].grad;
            for (int i = 0; i < gh.rows(); ++i) {
                if (!mask[i]) continue;
                for (int j = 0; j < gh.cols(); ++j) gh.at(i, j) += w * g.at(0, j);
            }
        }, "mean_pool_rows");
    }

    // ---- reverse pass ----

    /// Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse creation order.
    /// Parameters reachable from `loss` receive their gradients; the rest are
    /// untouched (zero if freshly zeroed).
    void backward(Var loss) {
        if (nodes_.empty()) throw TapeError("backward: tape is empty");
        if (backward_done_) throw TapeError("backward: called twice without reset");
        const Tensor& lv = val_of(loss);
        if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward: loss must be scalar");
        backward_done_ = true;
        if (!nodes_[loss.id_].requires_grad) return; // loss independent of parameters
        nodes_[loss.id_].grad.at(0, 0) = 1.0;
        for (int i = loss.id_; i >= 0; --i) {
            if (nodes_[i].requires_grad && nodes_[i].back) nodes_[i].back();
        }
    }

    void reset() {
        nodes_.clear();
        backward_done_ = false;
    }

    std::size_t num_nodes() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

    const Tensor& value(int id) const { return nodes_[id].value; }
    const Tensor& grad(int id) const { return nodes_[id].grad; }

private:
    friend class Var;

    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void()> back;
    };

    std::vector<Node> nodes_;
    bool backward_done_ = false;

    int next_id() const { return static_cast<int>(nodes_.size()); }

    Var push(Tensor value, bool requires_grad, std::function<void()> back, const char* op) {
        if (!all_finite(value)) throw NumericError(std::string("non-finite result in op ") + op);
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad) {
            n.grad = Tensor(n.value.rows(), n.value.cols());
            n.back = std::move(back);
        }
        nodes_.push_back(std::move(n));
        return Var(this, static_cast<int>(nodes_.size()) - 1);
    }

    const Tensor& val_of(Var v) const {
        if (v.tape_ != this || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size()))
            throw TapeError("Var does not belong to this tape");
        return nodes_[v.id_].value;
    }

    bool req(Var v) const { return nodes_[v.id_].requires_grad; }

    // add / hadamard with limited broadcasting of b: same shape, (m,1), (1,n), (1,1).
    Var binary_bcast(Var a, Var b, const char* op, bool mul) {
        const Tensor& av = val_of(a);
        const Tensor& bv = val_of(b);
        const int m = av.rows(), n = av.cols();
        const bool same = bv.rows() == m && bv.cols() == n;
        const bool col_b = bv.rows() == m && bv.cols() == 1;
        const bool row_b = bv.rows() == 1 && bv.cols() == n;
        const bool sca_b = bv.rows() == 1 && bv.cols() == 1;
        if (!(same || col_b || row_b || sca_b))
            throw ShapeError(std::string(op) + ": shapes not conformable");
        auto bval = [&](const Tensor& t, int i, int j) {
            if (same) return t.at(i, j);
            if (col_b) return t.at(i, 0);
            if (row_b) return t.at(0, j);
            return t.at(0, 0);
        };
        Tensor out(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                out.at(i, j) = mul ? av.at(i, j) * bval(bv, i, j) : av.at(i, j) + bval(bv, i, j);
        const int oid = next_id();
        return push(std::move(out), req(a) || req(b),
                    [this, oid, ai = a.id_, bi = b.id_, same, col_b, row_b, mul] {
            const Tensor& g = nodes_[oid].grad;
            const Tensor& av = nodes_[ai].value;
            const Tensor& bv = nodes_[bi].value;
            auto bval = [&](int i, int j) {
                if (same) return bv.at(i, j);
                if (col_b) return bv.at(i, 0);
                if (row_b) return bv.at(0, j);
                return bv.at(0, 0);
            };
            if (nodes_[ai].requires_grad) {
                Tensor& ga = nodes_[ai].grad;
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j)
                        ga.at(i, j) += mul ? g.at(i, j) * bval(i, j) : g.at(i, j);
            }
            if (nodes_[bi].requires_grad) {
                Tensor& gb = nodes_[bi].grad;
                for (int i = 0; i < g.rows(); ++i) {
                    for (int j = 0; j < g.cols(); ++j) {
                        const double contrib = mul ? g.at(i, j) * av.at(i, j) : g.at(i, j);
                        if (same) gb.at(i, j) += contrib;
                        else if (col_b) gb.at(i, 0) += contrib;
                        else if (row_b) gb.at(0, j) += contrib;
                        else gb.at(0, 0) += contrib;
                    }
                }
            }
        }, op);
    }

    // C += A * B
    static void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
        const int m = a.rows(), kk = a.cols(), n = b.cols();
        for (int i = 0; i < m; ++i) {
            double* ci = c.data() + static_cast<std::size_t>(i) * n;
            for (int k = 0; k < kk; ++k) {
                const double aik = a.at(i, k);
                if (aik == 0.0) continue;
                const double* bk = b.data() + static_cast<std::size_t>(k) * n;
                for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
            }
        }
    }

    // C += A * B^T
    static void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
        const int m = a.rows(), kk = a.cols(), n = b.rows();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                const double* ai = a.data() + static_cast<std::size_t>(i) * kk;
                const double* bj = b.data() + static_cast<std::size_t>(j) * kk;
                for (int k = 0; k < kk; ++k) s += ai[k] * bj[k];
                c.at(i, j) += s;
            }
        }
    }

    // C += A^T * B
    static void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
        const int kk = a.rows(), m = a.cols(), n = b.cols();
        for (int k = 0; k < kk; ++k) {
            const double* ak = a.data() + static_cast<std::size_t>(k) * m;
            const double* bk = b.data() + static_cast<std::size_t>(k) * n;
            for (int i = 0; i < m; ++i) {
                const double aki = ak[i];
                if (aki == 0.0) continue;
                double* ci = c.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) ci[j] += aki * bk[j];
            }
        }
    }
};

inline const Tensor& Var::val() const {
    if (!tape_) throw TapeError("Var::val: empty handle");
    return tape_->value(id_);
}

} // namespace dispat
