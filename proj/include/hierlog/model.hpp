#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hierlog/layers.hpp"
#include "hierlog/records.hpp"

namespace hierlog {

// Hierarchical CNN hyperparameters: characters -> event vector (event
// network + max over characters), event vectors -> sequence vector (sequence
// network + max over events), then a dense head with one sigmoid neuron.
struct ModelConfig {
    size_t max_events = 300;       // L_s
    size_t max_chars = 256;        // L_l
    size_t embed_dim = 16;         // C_e
    std::vector<size_t> event_widths = {64, 64, 128};   // last entry = C_l
    std::vector<size_t> event_kernels = {7, 3, 3};
    std::vector<size_t> seq_widths = {128, 128, 256};   // last entry = C_s
    std::vector<size_t> seq_kernels = {5, 3, 3};
    std::vector<size_t> dense_widths = {256, 128, 64, 1};
    size_t vocabulary_size = 97;

    void validate() const {
        if (max_events < 1 || max_chars < 1)
            throw ConfigError("max_events and max_chars must be >= 1");
        if (dense_widths.empty() || dense_widths.back() != 1)
            throw ConfigError("dense widths must end in 1");
        if (event_widths.size() != event_kernels.size() ||
            seq_widths.size() != seq_kernels.size())
            throw ConfigError("conv widths and kernels must have equal length");
        for (size_t k : event_kernels)
            if (k % 2 == 0) throw ConfigError("event kernel sizes must be odd");
        for (size_t k : seq_kernels)
            if (k % 2 == 0) throw ConfigError("sequence kernel sizes must be odd");
        if (vocabulary_size < 2) throw ConfigError("vocabulary_size must be >= 2");
    }
};

namespace detail {

inline std::string join_sizes(const std::vector<size_t>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline std::vector<size_t> parse_sizes(const std::string& s) {
    std::vector<size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) throw ConfigError("empty entry in size list: " + s);
        out.push_back(static_cast<size_t>(std::stoull(tok)));
    }
    return out;
}

}  // namespace detail

// Canonical key=value rendering; also the hashing basis that ties a config
// file to its checkpoint.
inline std::string config_to_text(const ModelConfig& c) {
    std::ostringstream os;
    os << "max_events = " << c.max_events << "\n"
       << "max_chars = " << c.max_chars << "\n"
       << "embed_dim = " << c.embed_dim << "\n"
       << "event_widths = " << detail::join_sizes(c.event_widths) << "\n"
       << "event_kernels = " << detail::join_sizes(c.event_kernels) << "\n"
       << "seq_widths = " << detail::join_sizes(c.seq_widths) << "\n"
       << "seq_kernels = " << detail::join_sizes(c.seq_kernels) << "\n"
       << "dense_widths = " << detail::join_sizes(c.dense_widths) << "\n"
       << "vocabulary_size = " << c.vocabulary_size << "\n";
    return os.str();
}

inline uint64_t config_hash(const ModelConfig& c) { return fnv1a64(config_to_text(c)); }

inline ModelConfig config_from_text(const std::string& text) {
    ModelConfig c;
    std::istringstream is(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("model config line " + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "max_events") c.max_events = std::stoull(val);
        else if (key == "max_chars") c.max_chars = std::stoull(val);
        else if (key == "embed_dim") c.embed_dim = std::stoull(val);
        else if (key == "event_widths") c.event_widths = detail::parse_sizes(val);
        else if (key == "event_kernels") c.event_kernels = detail::parse_sizes(val);
        else if (key == "seq_widths") c.seq_widths = detail::parse_sizes(val);
        else if (key == "seq_kernels") c.seq_kernels = detail::parse_sizes(val);
        else if (key == "dense_widths") c.dense_widths = detail::parse_sizes(val);
        else if (key == "vocabulary_size") c.vocabulary_size = std::stoull(val);
        else throw ConfigError("unknown model config key: " + key);
    }
    c.validate();
    return c;
}

// Character alphabet: code 0 = padding, printable ASCII 32..126 -> 1..95,
// everything else -> 96 (unknown). 97 codes total.
struct CharCodec {
    static constexpr uint16_t kPad = 0;
    static constexpr uint16_t kUnknown = 96;
    static constexpr size_t kVocabularySize = 97;

    static uint16_t encode(unsigned char c) {
        if (c >= 32 && c <= 126) return static_cast<uint16_t>(c - 31);
        return kUnknown;
    }
};

// Fixed-shape [L_s, L_l] code grid plus the true lengths used for masking.
struct EncodedSequence {
    size_t max_events = 0;             // L_s
    size_t max_chars = 0;              // L_l
    std::vector<uint16_t> codes;       // row-major [L_s, L_l], 0 = pad
    size_t event_count = 0;            // true events after truncation, >= 1
    std::vector<uint16_t> char_counts; // true chars per kept event, >= 1
    double label = 0.0;
};

// Events beyond L_s and characters beyond L_l are truncated from the tail.
// An empty event string encodes as a single unknown code so no valid region
// is ever empty.
inline EncodedSequence encode_sequence(const SequenceRecord& record, const ModelConfig& config) {
    if (record.events.empty())
        throw DataError("cannot encode empty sequence " + record.sequence_id);
    EncodedSequence enc;
    enc.max_events = config.max_events;
    enc.max_chars = config.max_chars;
    enc.codes.assign(config.max_events * config.max_chars, CharCodec::kPad);
    enc.event_count = std::min(record.events.size(), config.max_events);
    enc.label = static_cast<double>(record.label);
    enc.char_counts.reserve(enc.event_count);
    for (size_t e = 0; e < enc.event_count; ++e) {
        const std::string& ev = record.events[e];
        uint16_t* row = enc.codes.data() + e * config.max_chars;
        if (ev.empty()) {
            row[0] = CharCodec::kUnknown;
            enc.char_counts.push_back(1);
            continue;
        }
        const size_t n = std::min(ev.size(), config.max_chars);
        for (size_t i = 0; i < n; ++i) row[i] = CharCodec::encode(static_cast<unsigned char>(ev[i]));
        enc.char_counts.push_back(static_cast<uint16_t>(n));
    }
    return enc;
}

// The assembled Hierarchical CNN.
class Model {
  public:
    Model() = default;

    Model(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
        config_.validate();
        Rng rng(seed);
        embedding_ = EmbeddingTable(config_.vocabulary_size, config_.embed_dim, rng);
        event_net_ = ConvBlock(config_.embed_dim, config_.event_widths, config_.event_kernels, rng);
        seq_net_ = ConvBlock(event_net_.out_channels(), config_.seq_widths, config_.seq_kernels, rng);
        head_ = DenseBlock(seq_net_.out_channels(), config_.dense_widths, rng);
    }

    const ModelConfig& config() const { return config_; }

    // Anomaly probability for a single encoded sequence, strictly in (0,1).
    // Convolutions run over the valid region of each event (and of the event
    // axis) only; padded positions are never computed, which makes the output
    // independent of L_s/L_l padding by construction.
    TensorPtr forward(Tape& tape, const EncodedSequence& enc) const {
        if (enc.event_count == 0 || enc.event_count > enc.max_events)
            throw DimensionError("forward: inconsistent event_count");
        std::vector<TensorPtr> event_vecs;
        event_vecs.reserve(enc.event_count);
        for (size_t e = 0; e < enc.event_count; ++e) {
            const size_t len = enc.char_counts[e];
            if (len == 0 || len > enc.max_chars)
                throw DimensionError("forward: inconsistent char count for event " +
                                     std::to_string(e));
            std::span<const uint16_t> codes(enc.codes.data() + e * enc.max_chars, len);
            auto x = embed_lookup(tape, embedding_, codes, {len});      // [len, C_e]
            x = event_net_.apply(tape, x);                              // [len, C_l]
            event_vecs.push_back(masked_max(tape, x, 0, {len}).values); // [C_l]
        }
        auto seq = stack_rows(tape, event_vecs);                        // [E, C_l]
        seq = seq_net_.apply(tape, seq);                                // [E, C_s]
        auto pooled = masked_max(tape, seq, 0, {enc.event_count}).values;
        auto row = reshape(tape, pooled, {1, seq_net_.out_channels()});
        auto prob = head_.apply(tape, row);                             // [1, 1]
        return reshape(tape, prob, {1});
    }

    // Probabilities for a batch, stacked into a rank-1 [B] tensor.
    TensorPtr forward_batch(Tape& tape, const std::vector<EncodedSequence>& batch) const {
        std::vector<TensorPtr> probs;
        probs.reserve(batch.size());
        for (const auto& enc : batch) probs.push_back(forward(tape, enc));
        return stack_scalars(tape, probs);
    }

    NamedParams parameters() const {
        NamedParams params;
        params.emplace_back("embedding.weights", embedding_.weights);
        auto add_block = [&params](const std::string& prefix, const ConvBlock& block) {
            for (size_t i = 0; i < block.layers.size(); ++i) {
                params.emplace_back(prefix + "." + std::to_string(i) + ".kernel",
                                    block.layers[i].kernel);
                params.emplace_back(prefix + "." + std::to_string(i) + ".bias",
                                    block.layers[i].bias);
            }
        };
        add_block("event_conv", event_net_);
        add_block("seq_conv", seq_net_);
        for (size_t i = 0; i < head_.layers.size(); ++i) {
            params.emplace_back("dense." + std::to_string(i) + ".weight", head_.layers[i].weight);
            params.emplace_back("dense." + std::to_string(i) + ".bias", head_.layers[i].bias);
        }
        return params;
    }

    void zero_grads() const {
        for (const auto& [name, t] : parameters()) t->zero_grad();
    }

    // The checkpoint carries the model config hash as a bit-cast f64 under
    // "meta.config_hash" so checkpoint and config file can be cross-checked.
    void save(const std::string& path) const {
        NamedParams params = parameters();
        auto meta = make_tensor({1});
        const uint64_t h = config_hash(config_);
        static_assert(sizeof(double) == sizeof(uint64_t));
        std::memcpy(meta->data.data(), &h, sizeof(h));
        params.emplace_back("meta.config_hash", meta);
        save_checkpoint(path, params);
        std::ofstream cfg(path + ".cfg", std::ios::binary);
        if (!cfg) throw DataError("cannot write model config: " + path + ".cfg");
        cfg << config_to_text(config_);
    }

    static Model load(const std::string& path) {
        std::ifstream cfg_in(path + ".cfg", std::ios::binary);
        if (!cfg_in) throw DataError("missing model config file: " + path + ".cfg");
        std::stringstream ss;
        ss << cfg_in.rdbuf();
        Model model(config_from_text(ss.str()), 0);
        auto loaded = load_checkpoint(path);
        NamedParams params = model.parameters();
        size_t matched_count = 0;
        bool hash_seen = false;
        for (auto& [name, t] : loaded) {
            if (name == "meta.config_hash") {
                uint64_t h;
                std::memcpy(&h, t->data.data(), sizeof(h));
                if (h != config_hash(model.config_))
                    throw DataError("checkpoint/config hash mismatch for " + path);
                hash_seen = true;
                continue;
            }
            bool matched = false;
            for (auto& [pname, pt] : params) {
                if (pname != name) continue;
                if (pt->shape != t->shape)
                    throw DataError("checkpoint shape mismatch for " + name);
                pt->data = t->data;
                matched = true;
                ++matched_count;
                break;
            }
            if (!matched) throw DataError("unexpected checkpoint parameter: " + name);
        }
        if (!hash_seen) throw DataError("checkpoint missing config hash: " + path);
        if (matched_count != params.size())
            throw DataError("checkpoint is missing parameters for " + path);
        return model;
    }

  private:
    ModelConfig config_;
    EmbeddingTable embedding_;
    ConvBlock event_net_;
    ConvBlock seq_net_;
    DenseBlock head_;
};

// label = 1 iff probability >= threshold
inline int predict(double probability, double threshold = 0.5) {
    return probability >= threshold ? 1 : 0;
}

}  // namespace hierlog
