#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hierlog/common.hpp"

namespace hierlog {

// One labeled log sequence: the unit of classification.
struct SequenceRecord {
    std::string dataset;      // hdfs, openstack, hadoop, bgl, synth, ...
    std::string sequence_id;
    std::vector<std::string> events;  // raw event strings, non-empty
    int label = 0;                    // 0 = non-anomaly, 1 = anomaly
};

// Interchange format: newline-delimited JSON, one record per line, fields
// dataset, sequence_id, label, events. nlohmann::json emits keys sorted, so
// writes are byte-deterministic.
inline void write_records(std::ostream& os, const std::vector<SequenceRecord>& records) {
    for (const auto& r : records) {
        nlohmann::json j;
        j["dataset"] = r.dataset;
        j["sequence_id"] = r.sequence_id;
        j["label"] = r.label;
        j["events"] = r.events;
        os << j.dump() << "\n";
    }
}

inline void write_records(const std::string& path, const std::vector<SequenceRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_records(os, records);
    if (!os) throw DataError("write failed: " + path);
}

inline std::vector<SequenceRecord> read_records(std::istream& is, const std::string& origin) {
    std::vector<SequenceRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": bad record: " + e.what());
        }
        SequenceRecord r;
        r.dataset = j.at("dataset").get<std::string>();
        r.sequence_id = j.at("sequence_id").get<std::string>();
        r.label = j.at("label").get<int>();
        r.events = j.at("events").get<std::vector<std::string>>();
        if (r.label != 0 && r.label != 1)
            throw DataError(origin + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        if (r.events.empty())
            throw DataError(origin + ":" + std::to_string(lineno) + ": record has no events");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<SequenceRecord> read_records(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open records file: " + path);
    return read_records(is, path);
}

}  // namespace hierlog
