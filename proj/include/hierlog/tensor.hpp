#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hierlog/common.hpp"

namespace hierlog {

// Dense row-major f64 tensor, rank 1..4. The grad buffer exists only for
// tensors that participate in differentiation.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless requires_grad
    bool requires_grad = false;

    size_t size() const { return data.size(); }
    size_t rank() const { return shape.size(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }

    void zero_grad() {
        if (requires_grad) grad.assign(data.size(), 0.0);
    }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const std::vector<size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

inline void check_shape(const std::vector<size_t>& shape) {
    if (shape.empty() || shape.size() > 4)
        throw DimensionError("tensor rank must be 1..4, got " + shape_str(shape));
    for (size_t d : shape)
        if (d == 0) throw DimensionError("zero dimension in shape " + shape_str(shape));
}

inline TensorPtr make_tensor(std::vector<size_t> shape, bool requires_grad = false) {
    check_shape(shape);
    auto t = std::make_shared<Tensor>();
    t->data.assign(shape_numel(shape), 0.0);
    t->shape = std::move(shape);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

inline TensorPtr make_tensor(std::vector<size_t> shape, std::vector<double> data,
                             bool requires_grad = false) {
    check_shape(shape);
    if (data.size() != shape_numel(shape))
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

inline TensorPtr make_tensor(std::vector<size_t> shape, std::initializer_list<double> data,
                             bool requires_grad = false) {
    return make_tensor(std::move(shape), std::vector<double>(data), requires_grad);
}

// Records one backward closure per forward op; backward() replays them in
// reverse order exactly once.
class Tape {
  public:
    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

    size_t size() const { return ops_.size(); }

    void backward(const TensorPtr& loss) {
        if (loss->size() != 1)
            throw DimensionError("backward expects a scalar, got " + shape_str(loss->shape));
        loss->ensure_grad();
        loss->grad[0] = 1.0;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
        ops_.clear();
    }

    void clear() { ops_.clear(); }

  private:
    std::vector<std::function<void()>> ops_;
};

namespace detail {

inline bool& grad_mode() {
    static thread_local bool enabled = true;
    return enabled;
}

inline bool any_grad(std::initializer_list<TensorPtr> ts) {
    if (!grad_mode()) return false;
    for (const auto& t : ts)
        if (t->requires_grad) return true;
    return false;
}

inline TensorPtr op_output(std::vector<size_t> shape, bool requires_grad) {
    return make_tensor(std::move(shape), requires_grad);
}

}  // namespace detail

// Disables gradient recording for the enclosing scope (inference paths).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// out[m,n] = sum_k a[m,k] b[k,n]
inline TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->rank() != 2 || b->rank() != 2 || a->shape[1] != b->shape[0])
        throw DimensionError("matmul shape mismatch: " + shape_str(a->shape) + " x " +
                             shape_str(b->shape));
    const size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    bool rg = detail::any_grad({a, b});
    auto out = detail::op_output({m, n}, rg);
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a->data.data() + i * k;
        double* orow = out->data.data() + i * n;
        for (size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b->data.data() + kk * n;
            for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    if (rg) {
        tape.record([a, b, out, m, k, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < m; ++i)
                    for (size_t j = 0; j < n; ++j) {
                        const double g = out->grad[i * n + j];
                        for (size_t kk = 0; kk < k; ++kk)
                            a->grad[i * k + kk] += g * b->data[kk * n + j];
                    }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < m; ++i)
                    for (size_t kk = 0; kk < k; ++kk) {
                        const double av = a->data[i * k + kk];
                        for (size_t j = 0; j < n; ++j)
                            b->grad[kk * n + j] += av * out->grad[i * n + j];
                    }
            }
        });
    }
    return out;
}

// Length-preserving 1-D convolution with "same" zero padding.
// input [L, C_in], kernel [K, C_in, C_out], bias [C_out] -> [L, C_out]
inline TensorPtr conv1d(Tape& tape, const TensorPtr& input, const TensorPtr& kernel,
                        const TensorPtr& bias) {
    if (input->rank() != 2 || kernel->rank() != 3 || bias->rank() != 1)
        throw DimensionError("conv1d expects input [L,Cin], kernel [K,Cin,Cout], bias [Cout]");
    const size_t L = input->shape[0], cin = input->shape[1];
    const size_t K = kernel->shape[0], cout = kernel->shape[2];
    if (K % 2 == 0) throw ConfigError("conv1d kernel size must be odd, got " + std::to_string(K));
    if (kernel->shape[1] != cin)
        throw DimensionError("conv1d channel mismatch: input " + shape_str(input->shape) +
                             " vs kernel " + shape_str(kernel->shape));
    if (bias->shape[0] != cout)
        throw DimensionError("conv1d bias size " + shape_str(bias->shape) + " vs kernel " +
                             shape_str(kernel->shape));
    const size_t pad = (K - 1) / 2;
    bool rg = detail::any_grad({input, kernel, bias});
    auto out = detail::op_output({L, cout}, rg);
    for (size_t t = 0; t < L; ++t) {
        double* orow = out->data.data() + t * cout;
        for (size_t o = 0; o < cout; ++o) orow[o] = bias->data[o];
        for (size_t dt = 0; dt < K; ++dt) {
            const long s = static_cast<long>(t + dt) - static_cast<long>(pad);
            if (s < 0 || s >= static_cast<long>(L)) continue;
            const double* irow = input->data.data() + static_cast<size_t>(s) * cin;
            const double* kplane = kernel->data.data() + dt * cin * cout;
            for (size_t i = 0; i < cin; ++i) {
                const double iv = irow[i];
                if (iv == 0.0) continue;
                const double* krow = kplane + i * cout;
                for (size_t o = 0; o < cout; ++o) orow[o] += iv * krow[o];
            }
        }
    }
    if (rg) {
        tape.record([input, kernel, bias, out, L, cin, K, cout, pad] {
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (size_t t = 0; t < L; ++t)
                    for (size_t o = 0; o < cout; ++o) bias->grad[o] += out->grad[t * cout + o];
            }
            const bool gi = input->requires_grad, gk = kernel->requires_grad;
            if (gi) input->ensure_grad();
            if (gk) kernel->ensure_grad();
            if (!gi && !gk) return;
            for (size_t t = 0; t < L; ++t) {
                const double* grow = out->grad.data() + t * cout;
                for (size_t dt = 0; dt < K; ++dt) {
                    const long s = static_cast<long>(t + dt) - static_cast<long>(pad);
                    if (s < 0 || s >= static_cast<long>(L)) continue;
                    const size_t su = static_cast<size_t>(s);
                    const double* kplane = kernel->data.data() + dt * cin * cout;
                    for (size_t i = 0; i < cin; ++i) {
                        if (gi) {
                            double acc = 0.0;
                            const double* krow = kplane + i * cout;
                            for (size_t o = 0; o < cout; ++o) acc += krow[o] * grow[o];
                            input->grad[su * cin + i] += acc;
                        }
                        if (gk) {
                            const double iv = input->data[su * cin + i];
                            if (iv == 0.0) continue;
                            double* kgrow = kernel->grad.data() + dt * cin * cout + i * cout;
                            for (size_t o = 0; o < cout; ++o) kgrow[o] += iv * grow[o];
                        }
                    }
                }
            }
        });
    }
    return out;
}

struct MaskedMaxResult {
    TensorPtr values;             // input shape with `axis` removed
    std::vector<size_t> argmax;   // winning index along `axis`, per (outer, inner)
};

// Maximum over the first valid[outer] positions of `axis`. Padded positions
// beyond the valid length never win. Ties go to the lowest index so backward
// routing is deterministic.
inline MaskedMaxResult masked_max(Tape& tape, const TensorPtr& input, size_t axis,
                                  const std::vector<size_t>& valid) {
    if (axis >= input->rank())
        throw DimensionError("masked_max axis " + std::to_string(axis) + " out of range for " +
                             shape_str(input->shape));
    const size_t red = input->shape[axis];
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= input->shape[i];
    for (size_t i = axis + 1; i < input->rank(); ++i) inner *= input->shape[i];
    if (valid.size() != outer)
        throw DimensionError("masked_max expects one valid length per outer slice: got " +
                             std::to_string(valid.size()) + ", want " + std::to_string(outer));
    for (size_t v : valid) {
        if (v == 0) throw DataError("masked_max: empty reduction (valid length 0)");
        if (v > red)
            throw DimensionError("masked_max valid length " + std::to_string(v) +
                                 " exceeds axis size " + std::to_string(red));
    }
    std::vector<size_t> out_shape;
    for (size_t i = 0; i < input->rank(); ++i)
        if (i != axis) out_shape.push_back(input->shape[i]);
    if (out_shape.empty()) out_shape.push_back(1);
    const bool rg = detail::any_grad({input});
    auto out = detail::op_output(out_shape, rg);
    auto argmax = std::make_shared<std::vector<size_t>>(outer * inner, 0);
    for (size_t ou = 0; ou < outer; ++ou) {
        const size_t base = ou * red * inner;
        for (size_t in = 0; in < inner; ++in) {
            double best = input->data[base + in];
            size_t besti = 0;
            for (size_t r = 1; r < valid[ou]; ++r) {
                const double v = input->data[base + r * inner + in];
                if (v > best) {
                    best = v;
                    besti = r;
                }
            }
            out->data[ou * inner + in] = best;
            (*argmax)[ou * inner + in] = besti;
        }
    }
    if (rg) {
        tape.record([input, out, argmax, outer, inner, red] {
            input->ensure_grad();
            for (size_t ou = 0; ou < outer; ++ou)
                for (size_t in = 0; in < inner; ++in) {
                    const size_t r = (*argmax)[ou * inner + in];
                    input->grad[ou * red * inner + r * inner + in] += out->grad[ou * inner + in];
                }
        });
    }
    return {out, *argmax};
}

inline TensorPtr relu(Tape& tape, const TensorPtr& x) {
    const bool rg = detail::any_grad({x});
    auto out = detail::op_output(x->shape, rg);
    for (size_t i = 0; i < x->size(); ++i) out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
    if (rg) {
        tape.record([x, out] {
            x->ensure_grad();
            for (size_t i = 0; i < x->size(); ++i)
                if (x->data[i] > 0.0) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

inline TensorPtr sigmoid(Tape& tape, const TensorPtr& x) {
    const bool rg = detail::any_grad({x});
    auto out = detail::op_output(x->shape, rg);
    for (size_t i = 0; i < x->size(); ++i) out->data[i] = 1.0 / (1.0 + std::exp(-x->data[i]));
    if (rg) {
        tape.record([x, out] {
            x->ensure_grad();
            for (size_t i = 0; i < x->size(); ++i) {
                const double s = out->data[i];
                x->grad[i] += s * (1.0 - s) * out->grad[i];
            }
        });
    }
    return out;
}

// x [m,n] + b [n], broadcast over rows.
inline TensorPtr add_bias(Tape& tape, const TensorPtr& x, const TensorPtr& b) {
    if (x->rank() != 2 || b->rank() != 1 || x->shape[1] != b->shape[0])
        throw DimensionError("add_bias shape mismatch: " + shape_str(x->shape) + " + " +
                             shape_str(b->shape));
    const size_t m = x->shape[0], n = x->shape[1];
    bool rg = detail::any_grad({x, b});
    auto out = detail::op_output(x->shape, rg);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out->data[i * n + j] = x->data[i * n + j] + b->data[j];
    if (rg) {
        tape.record([x, b, out, m, n] {
            if (x->requires_grad) {
                x->ensure_grad();
                for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < m; ++i)
                    for (size_t j = 0; j < n; ++j) b->grad[j] += out->grad[i * n + j];
            }
        });
    }
    return out;
}

// Stacks N rank-1 tensors of identical length C into an [N, C] tensor.
inline TensorPtr stack_rows(Tape& tape, const std::vector<TensorPtr>& rows) {
    if (rows.empty()) throw DimensionError("stack_rows: empty input");
    const size_t c = rows[0]->size();
    bool rg = false;
    for (const auto& r : rows) {
        if (r->rank() != 1 || r->size() != c)
            throw DimensionError("stack_rows: inconsistent row shape " + shape_str(r->shape));
        rg = rg || r->requires_grad;
    }
    auto out = detail::op_output({rows.size(), c}, rg);
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i]->data.begin(), rows[i]->data.end(), out->data.begin() + i * c);
    if (rg) {
        tape.record([rows, out, c] {
            for (size_t i = 0; i < rows.size(); ++i) {
                if (!rows[i]->requires_grad) continue;
                rows[i]->ensure_grad();
                for (size_t j = 0; j < c; ++j) rows[i]->grad[j] += out->grad[i * c + j];
            }
        });
    }
    return out;
}

// Concatenates N scalar tensors into a rank-1 [N] tensor.
inline TensorPtr stack_scalars(Tape& tape, const std::vector<TensorPtr>& xs) {
    if (xs.empty()) throw DimensionError("stack_scalars: empty input");
    bool rg = false;
    for (const auto& x : xs) {
        if (x->size() != 1) throw DimensionError("stack_scalars expects scalars");
        rg = rg || x->requires_grad;
    }
    auto out = detail::op_output({xs.size()}, rg);
    for (size_t i = 0; i < xs.size(); ++i) out->data[i] = xs[i]->data[0];
    if (rg) {
        tape.record([xs, out] {
            for (size_t i = 0; i < xs.size(); ++i) {
                if (!xs[i]->requires_grad) continue;
                xs[i]->ensure_grad();
                xs[i]->grad[0] += out->grad[i];
            }
        });
    }
    return out;
}

// Copies data into a new shape with the same element count.
inline TensorPtr reshape(Tape& tape, const TensorPtr& x, std::vector<size_t> shape) {
    if (shape_numel(shape) != x->size())
        throw DimensionError("reshape " + shape_str(x->shape) + " -> " + shape_str(shape) +
                             " changes element count");
    const bool rg = detail::any_grad({x});
    auto out = detail::op_output(std::move(shape), rg);
    out->data = x->data;
    if (rg) {
        tape.record([x, out] {
            x->ensure_grad();
            for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

inline constexpr double kProbClamp = 1e-7;

// Class-weighted binary cross entropy over a probability batch.
// loss = -(1/B) sum [ w*y*log p + (1-y)*log(1-p) ], p clamped to
// [1e-7, 1-1e-7]; the gradient is zero where the clamp is active.
inline TensorPtr weighted_bce_loss(Tape& tape, const TensorPtr& probs,
                                   const std::vector<double>& labels, double positive_weight) {
    if (positive_weight <= 0.0)
        throw ConfigError("positive_weight must be > 0, got " + std::to_string(positive_weight));
    if (probs->rank() != 1 || probs->size() != labels.size())
        throw DimensionError("weighted_bce_loss: probs " + shape_str(probs->shape) + " vs " +
                             std::to_string(labels.size()) + " labels");
    const size_t n = probs->size();
    const bool rg = detail::any_grad({probs});
    auto out = detail::op_output({1}, rg);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double p = std::clamp(probs->data[i], kProbClamp, 1.0 - kProbClamp);
        const double y = labels[i];
        acc -= positive_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    out->data[0] = acc / static_cast<double>(n);
    if (rg) {
        auto lbl = std::make_shared<std::vector<double>>(labels);
        tape.record([probs, out, lbl, positive_weight, n] {
            probs->ensure_grad();
            const double g = out->grad[0] / static_cast<double>(n);
            for (size_t i = 0; i < n; ++i) {
                const double raw = probs->data[i];
                if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
                const double y = (*lbl)[i];
                probs->grad[i] += g * (-(positive_weight * y / raw) + (1.0 - y) / (1.0 - raw));
            }
        });
    }
    return out;
}

}  // namespace hierlog
