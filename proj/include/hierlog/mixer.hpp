#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hierlog/records.hpp"

namespace hierlog {

struct SplitSpec {
    double train_fraction = 0.5;
    uint64_t seed = 0;
    bool stratified = true;

    void validate() const {
        if (train_fraction <= 0.0 || train_fraction >= 1.0)
            throw ConfigError("train_fraction must be in (0,1)");
    }
};

// Per-dataset inclusion fraction of the training half for multi-project
// composition.
struct MixSpec {
    std::map<std::string, double> fractions = {
        {"hdfs", 0.40}, {"bgl", 0.60}, {"hadoop", 0.80}, {"openstack", 0.90}};

    void validate() const {
        for (const auto& [name, f] : fractions)
            if (f <= 0.0 || f > 1.0)
                throw ConfigError("mix fraction for " + name + " must be in (0,1]");
    }
};

struct SplitResult {
    std::vector<SequenceRecord> train;
    std::vector<SequenceRecord> test;
    bool stratification_fallback = false;  // some (dataset,label) stratum had < 2 members
};

namespace detail {

inline size_t take_count(double fraction, size_t n) {
    return static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace detail

// Disjoint, exhaustive train/test split, stratified per label within each
// dataset. Deterministic under the spec seed and independent of input order
// (records are bucketed by key, then shuffled with a bucket-derived stream).
inline SplitResult split(const std::vector<SequenceRecord>& records, const SplitSpec& spec) {
    spec.validate();
    SplitResult result;
    std::map<std::string, std::vector<size_t>> strata;
    for (size_t i = 0; i < records.size(); ++i) {
        std::string key = records[i].dataset;
        if (spec.stratified) key += "/" + std::to_string(records[i].label);
        strata[key].push_back(i);
    }
    if (spec.stratified) {
        for (const auto& [key, idx] : strata)
            if (idx.size() < 2) result.stratification_fallback = true;
        if (result.stratification_fallback) {
            SplitSpec flat = spec;
            flat.stratified = false;
            auto fallback = split(records, flat);
            fallback.stratification_fallback = true;
            return fallback;
        }
    }
    for (auto& [key, idx] : strata) {
        // canonical order first, so the split does not depend on input order
        std::sort(idx.begin(), idx.end(), [&records](size_t a, size_t b) {
            return records[a].sequence_id < records[b].sequence_id;
        });
        Rng rng(derive_seed(spec.seed, key));
        rng.shuffle(idx);
        const size_t n_train = detail::take_count(spec.train_fraction, idx.size());
        for (size_t k = 0; k < idx.size(); ++k)
            (k < n_train ? result.train : result.test).push_back(records[idx[k]]);
    }
    return result;
}

// Seeded uniform sample of round(f*n) records per dataset, concatenated and
// shuffled. Inputs must be training halves only; keeping test data out is the
// caller's contract and is checked downstream by id-set intersection.
inline std::vector<SequenceRecord> compose_multi_project(
    const std::map<std::string, std::vector<SequenceRecord>>& train_halves, const MixSpec& mix,
    uint64_t seed) {
    mix.validate();
    std::vector<SequenceRecord> combined;
    for (const auto& [name, records] : train_halves) {
        const auto it = mix.fractions.find(name);
        const double f = it == mix.fractions.end() ? 1.0 : it->second;
        std::vector<size_t> idx(records.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&records](size_t a, size_t b) {
            return records[a].sequence_id < records[b].sequence_id;
        });
        Rng rng(derive_seed(seed, "mix/" + name));
        rng.shuffle(idx);
        const size_t take = detail::take_count(f, records.size());
        for (size_t k = 0; k < take; ++k) combined.push_back(records[idx[k]]);
    }
    Rng rng(derive_seed(seed, "mix/shuffle"));
    rng.shuffle(combined);
    return combined;
}

// positive_weight = (# label-0) / (# label-1)
inline double class_weight(const std::vector<SequenceRecord>& train) {
    size_t pos = 0, neg = 0;
    for (const auto& r : train) (r.label == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw ConfigError("class_weight: training set must contain both classes (" +
                          std::to_string(neg) + " negative, " + std::to_string(pos) +
                          " positive)");
    return static_cast<double>(neg) / static_cast<double>(pos);
}

}  // namespace hierlog
