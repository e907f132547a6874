#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hierlog/checkpoint.hpp"
#include "hierlog/tensor.hpp"

namespace hierlog {

inline void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
    for (double& v : t.data) v = rng.uniform(lo, hi);
}

// bound = sqrt(6 / fan_in)
inline void fill_kaiming_uniform(Tensor& t, Rng& rng, size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    fill_uniform(t, rng, -bound, bound);
}

// Biases get a small uniform range keyed to fan-in rather than zeros: an
// exactly-zero bias behind a dead channel parks the next pre-activation on the
// ReLU kink, which kills gradient flow and breaks finite-difference checks.
inline void fill_bias_uniform(Tensor& t, Rng& rng, size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    fill_uniform(t, rng, -bound, bound);
}

// Character/padding embedding matrix. Row 0 is the padding symbol and stays
// all-zeros forever: lookups never route gradient into it.
struct EmbeddingTable {
    size_t vocabulary_size = 0;
    size_t dim = 0;
    TensorPtr weights;  // [vocabulary_size, dim]

    EmbeddingTable() = default;

    EmbeddingTable(size_t vocab, size_t d, Rng& rng) : vocabulary_size(vocab), dim(d) {
        weights = make_tensor({vocab, d}, true);
        fill_uniform(*weights, rng, -0.05, 0.05);
        for (size_t j = 0; j < d; ++j) weights->data[j] = 0.0;
    }
};

// Gathers embedding rows for a flat index list; out_shape is the index shape
// with `dim` appended. Backward scatter-adds into the table except row 0.
inline TensorPtr embed_lookup(Tape& tape, const EmbeddingTable& table,
                              std::span<const uint16_t> indices,
                              std::vector<size_t> index_shape) {
    if (shape_numel(index_shape) != indices.size())
        throw DimensionError("embed_lookup: index shape " + shape_str(index_shape) +
                             " vs " + std::to_string(indices.size()) + " indices");
    const size_t d = table.dim;
    for (size_t i = 0; i < indices.size(); ++i)
        if (indices[i] >= table.vocabulary_size)
            throw DataError("embed_lookup: index " + std::to_string(indices[i]) +
                            " out of range at position " + std::to_string(i));
    index_shape.push_back(d);
    auto w = table.weights;
    const bool rg = detail::any_grad({w});
    auto out = detail::op_output(index_shape, rg);
    for (size_t i = 0; i < indices.size(); ++i) {
        const double* src = w->data.data() + static_cast<size_t>(indices[i]) * d;
        std::copy(src, src + d, out->data.begin() + i * d);
    }
    if (rg) {
        auto idx = std::make_shared<std::vector<uint16_t>>(indices.begin(), indices.end());
        tape.record([w, out, idx, d] {
            w->ensure_grad();
            for (size_t i = 0; i < idx->size(); ++i) {
                const size_t row = (*idx)[i];
                if (row == 0) continue;  // frozen pad row
                for (size_t j = 0; j < d; ++j) w->grad[row * d + j] += out->grad[i * d + j];
            }
        });
    }
    return out;
}

// One conv1d layer followed by ReLU.
struct ConvLayer {
    TensorPtr kernel;  // [K, C_in, C_out]
    TensorPtr bias;    // [C_out]
};

// A stack of length-preserving conv layers whose channel widths chain.
struct ConvBlock {
    std::vector<ConvLayer> layers;

    ConvBlock() = default;

    ConvBlock(size_t in_channels, const std::vector<size_t>& widths,
              const std::vector<size_t>& kernels, Rng& rng) {
        if (widths.size() != kernels.size())
            throw ConfigError("conv block: " + std::to_string(widths.size()) + " widths vs " +
                              std::to_string(kernels.size()) + " kernels");
        if (widths.empty()) throw ConfigError("conv block needs at least one layer");
        size_t cin = in_channels;
        for (size_t i = 0; i < widths.size(); ++i) {
            if (kernels[i] % 2 == 0)
                throw ConfigError("conv kernel sizes must be odd, got " +
                                  std::to_string(kernels[i]));
            ConvLayer layer;
            layer.kernel = make_tensor({kernels[i], cin, widths[i]}, true);
            fill_kaiming_uniform(*layer.kernel, rng, kernels[i] * cin);
            layer.bias = make_tensor({widths[i]}, true);
            fill_bias_uniform(*layer.bias, rng, kernels[i] * cin);
            layers.push_back(std::move(layer));
            cin = widths[i];
        }
    }

    size_t out_channels() const { return layers.back().kernel->shape[2]; }

    TensorPtr apply(Tape& tape, TensorPtr x) const {
        for (const auto& layer : layers) x = relu(tape, conv1d(tape, x, layer.kernel, layer.bias));
        return x;
    }
};

struct DenseLayer {
    TensorPtr weight;  // [in, out]
    TensorPtr bias;    // [out]
};

// Fully-connected head: ReLU between hidden layers, sigmoid on the final
// single-neuron layer.
struct DenseBlock {
    std::vector<DenseLayer> layers;

    DenseBlock() = default;

    DenseBlock(size_t in_features, const std::vector<size_t>& widths, Rng& rng) {
        if (widths.empty() || widths.back() != 1)
            throw ConfigError("dense head must end in a single output neuron");
        size_t fin = in_features;
        for (size_t w : widths) {
            DenseLayer layer;
            layer.weight = make_tensor({fin, w}, true);
            fill_kaiming_uniform(*layer.weight, rng, fin);
            layer.bias = make_tensor({w}, true);
            fill_bias_uniform(*layer.bias, rng, fin);
            layers.push_back(std::move(layer));
            fin = w;
        }
    }

    // x [B, in] -> probabilities [B, 1]
    TensorPtr apply(Tape& tape, TensorPtr x) const {
        for (size_t i = 0; i < layers.size(); ++i) {
            x = add_bias(tape, matmul(tape, x, layers[i].weight), layers[i].bias);
            x = (i + 1 < layers.size()) ? relu(tape, x) : sigmoid(tape, x);
        }
        return x;
    }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. The frozen embedding pad row receives no update because
// its gradient is always zero, so its moments never leave zero.
class AdamState {
  public:
    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    uint64_t step_count() const { return step_; }

    void step(const NamedParams& params) {
        if (moments_.empty()) {
            for (const auto& [name, t] : params)
                moments_.push_back({std::vector<double>(t->size(), 0.0),
                                    std::vector<double>(t->size(), 0.0)});
        }
        if (moments_.size() != params.size())
            throw TrainingError("optimizer state does not match parameter list");
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (size_t k = 0; k < params.size(); ++k) {
            const auto& [name, t] = params[k];
            if (t->grad.size() != t->size())
                throw TrainingError("missing gradient for parameter " + name);
            auto& [m, v] = moments_[k];
            for (size_t i = 0; i < t->size(); ++i) {
                const double g = t->grad[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                t->data[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
            }
        }
    }

  private:
    AdamConfig cfg_;
    uint64_t step_ = 0;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> moments_;
};

}  // namespace hierlog
