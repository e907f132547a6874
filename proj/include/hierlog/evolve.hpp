#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hierlog/records.hpp"

namespace hierlog {

// Synthetic log-evolution noise: duplication, removal, and shuffle of events.
struct EvolutionConfig {
    double noise_ratio = 0.3;
    uint64_t seed = 0;
    size_t shuffle_window_max = 10;
    bool enable_duplicate = true;
    bool enable_remove = true;
    bool enable_shuffle = true;

    void validate() const {
        if (noise_ratio < 0.0 || noise_ratio > 1.0)
            throw ConfigError("noise_ratio must be in [0,1], got " + std::to_string(noise_ratio));
        if (shuffle_window_max < 2) throw ConfigError("shuffle_window_max must be >= 2");
        if (!enable_duplicate && !enable_remove && !enable_shuffle)
            throw ConfigError("at least one evolution operation must be enabled");
    }
};

inline std::vector<std::string> duplicate_event(std::vector<std::string> events, size_t index) {
    if (index >= events.size()) throw DataError("duplicate_event: index out of range");
    events.insert(events.begin() + index + 1, events[index]);
    return events;
}

inline std::vector<std::string> remove_event(std::vector<std::string> events, size_t index) {
    if (events.size() < 2) throw DataError("remove_event: would empty the sequence");
    if (index >= events.size()) throw DataError("remove_event: index out of range");
    events.erase(events.begin() + index);
    return events;
}

// Replaces events[start, start+width) with a uniform random permutation of
// itself (Fisher-Yates, identity included).
inline std::vector<std::string> shuffle_subsequence(std::vector<std::string> events, size_t start,
                                                    size_t width, Rng& rng) {
    if (width < 2 || start + width > events.size())
        throw DataError("shuffle_subsequence: bad window [" + std::to_string(start) + ", +" +
                        std::to_string(width) + ") for " + std::to_string(events.size()) +
                        " events");
    for (size_t i = width; i > 1; --i)
        std::swap(events[start + i - 1], events[start + rng.index(i)]);
    return events;
}

// Applies ceil(noise_ratio * event_count) atomic edits, each drawn uniformly
// from {duplicate, remove, shuffle}. The label is never touched. Sequences of
// fewer than 2 events pass through unchanged.
inline SequenceRecord evolve_sequence(const SequenceRecord& record, const EvolutionConfig& config,
                                      Rng& rng, size_t* skipped = nullptr) {
    config.validate();
    if (record.events.size() < 2) {
        if (skipped) ++*skipped;
        return record;
    }
    SequenceRecord out = record;
    const size_t n_ops =
        static_cast<size_t>(std::ceil(config.noise_ratio * static_cast<double>(out.events.size())));
    std::vector<size_t> kinds;
    if (config.enable_duplicate) kinds.push_back(0);
    if (config.enable_remove) kinds.push_back(1);
    if (config.enable_shuffle) kinds.push_back(2);
    for (size_t op = 0; op < n_ops; ++op) {
        size_t kind = kinds[rng.index(kinds.size())];
        const size_t len = out.events.size();
        // remove/shuffle need >= 2 events; fall back to duplicate on a
        // degenerate 1-event sequence rather than dropping the edit
        if (kind != 0 && len < 2) kind = 0;
        switch (kind) {
            case 0:
                out.events = duplicate_event(std::move(out.events), rng.index(len));
                break;
            case 1:
                out.events = remove_event(std::move(out.events), rng.index(len));
                break;
            default: {
                const size_t max_width = std::min(config.shuffle_window_max, len);
                const size_t width = 2 + rng.index(max_width - 1);  // uniform in [2, max_width]
                const size_t start = rng.index(len - width + 1);
                out.events = shuffle_subsequence(std::move(out.events), start, width, rng);
            }
        }
    }
    return out;
}

// Evolves a whole corpus. The per-record stream is derived from
// (config.seed, sequence_id) so output is independent of record order.
inline std::vector<SequenceRecord> evolve_records(const std::vector<SequenceRecord>& records,
                                                  const EvolutionConfig& config,
                                                  size_t* skipped = nullptr) {
    config.validate();
    std::vector<SequenceRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        Rng rng(derive_seed(config.seed, r.dataset + "/" + r.sequence_id));
        out.push_back(evolve_sequence(r, config, rng, skipped));
    }
    return out;
}

}  // namespace hierlog
