#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "hierlog/records.hpp"

namespace hierlog {

// Synthetic planted-token corpus generator for CI and desk-scale experiments.
// Normal sequences are built from a small set of templated log lines with
// fluctuating numeric fields; anomalous sequences additionally contain lines
// carrying a rare numeric status token, so the signal lives entirely at the
// character level.
struct SynthConfig {
    size_t count = 200;
    double anomaly_fraction = 0.1;
    uint64_t seed = 0;
    size_t min_events = 5;
    size_t max_events = 20;
    std::string dataset = "synth";

    void validate() const {
        if (count < 1) throw ConfigError("synth count must be >= 1");
        if (anomaly_fraction < 0.0 || anomaly_fraction > 1.0)
            throw ConfigError("anomaly_fraction must be in [0,1]");
        if (min_events < 1 || min_events > max_events)
            throw ConfigError("need 1 <= min_events <= max_events");
    }
};

namespace detail {

inline std::string synth_line(Rng& rng, bool anomalous) {
    static const char* kComponents[] = {"dfs.DataNode$DataXceiver", "dfs.FSNamesystem",
                                        "dfs.DataNode$PacketResponder", "dfs.DataBlockScanner"};
    static const char* kVerbs[] = {"Receiving block", "Served block", "Verification succeeded for",
                                   "PacketResponder terminating for"};
    char buf[256];
    const unsigned ts = 100000 + static_cast<unsigned>(rng.index(899999));
    const unsigned pid = 1 + static_cast<unsigned>(rng.index(8999));
    const long blk = static_cast<long>(rng.index(1000000000));
    const unsigned ip = 1 + static_cast<unsigned>(rng.index(254));
    const unsigned status = anomalous ? 503 + static_cast<unsigned>(rng.index(3)) * 91
                                      : 200 + static_cast<unsigned>(rng.index(4));
    std::snprintf(buf, sizeof(buf),
                  "081109 %06u %u INFO %s: %s blk_%s%ld src: /10.250.%u.%u:%u status=%u",
                  ts, pid, kComponents[rng.index(4)], kVerbs[rng.index(4)],
                  rng.index(2) ? "-" : "", blk, ip, 1 + static_cast<unsigned>(rng.index(254)),
                  50010 + static_cast<unsigned>(rng.index(100)), status);
    return buf;
}

}  // namespace detail

inline std::vector<SequenceRecord> generate_synthetic(const SynthConfig& config) {
    config.validate();
    const size_t n_anomaly =
        static_cast<size_t>(std::llround(config.anomaly_fraction * static_cast<double>(config.count)));
    std::vector<SequenceRecord> out;
    out.reserve(config.count);
    for (size_t i = 0; i < config.count; ++i) {
        const bool anomalous = i < n_anomaly;
        char id[32];
        std::snprintf(id, sizeof(id), "seq_%06zu", i);
        Rng rng(derive_seed(config.seed, std::string("synth/") + id));
        SequenceRecord r;
        r.dataset = config.dataset;
        r.sequence_id = id;
        r.label = anomalous ? 1 : 0;
        const size_t n_events =
            config.min_events + rng.index(config.max_events - config.min_events + 1);
        // at least one planted line per anomalous sequence
        const size_t planted = anomalous ? rng.index(n_events) : n_events;
        for (size_t e = 0; e < n_events; ++e) {
            const bool plant = anomalous && (e == planted || rng.index(8) == 0);
            r.events.push_back(detail::synth_line(rng, plant));
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace hierlog
