#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "hierlog/records.hpp"

namespace hierlog {

struct WindowSpec {
    size_t window_size = 300;
    size_t stride = 30;

    void validate() const {
        if (stride < 1 || stride > window_size)
            throw ConfigError("window stride must satisfy 1 <= stride <= window_size");
    }
};

struct IngestStats {
    size_t lines_read = 0;
    size_t skipped_unlabeled = 0;   // hdfs: block ids absent from the label file
    size_t malformed_lines = 0;     // bgl: lines without a recognizable alert column
};

// Window start offsets for a stream of n events. Streams of <= window_size
// events yield a single window; otherwise windows start at 0, stride,
// 2*stride, ... and a final tail-aligned window is appended when the last
// events would otherwise be dropped.
inline std::vector<size_t> window_starts(size_t n, const WindowSpec& spec) {
    spec.validate();
    if (n == 0) throw DataError("window_starts: empty event stream");
    if (n <= spec.window_size) return {0};
    const size_t last = n - spec.window_size;
    std::vector<size_t> starts;
    for (size_t s = 0; s <= last; s += spec.stride) starts.push_back(s);
    if (last % spec.stride != 0) starts.push_back(last);
    return starts;
}

inline std::vector<std::vector<std::string>> sliding_window(
    const std::vector<std::string>& events, const WindowSpec& spec) {
    std::vector<std::vector<std::string>> out;
    for (size_t s : window_starts(events.size(), spec)) {
        const size_t end = std::min(s + spec.window_size, events.size());
        out.emplace_back(events.begin() + s, events.begin() + end);
    }
    return out;
}

inline std::vector<SequenceRecord> invert_labels(std::vector<SequenceRecord> records) {
    for (auto& r : records) r.label = 1 - r.label;
    return records;
}

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open log file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline void sort_records(std::vector<SequenceRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const SequenceRecord& a, const SequenceRecord& b) {
                         return a.sequence_id < b.sequence_id;
                     });
}

inline std::string window_id(const std::string& base, size_t offset) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%08zu", offset);
    return base + "#" + buf;
}

}  // namespace detail

// HDFS: sequences are grouped by block id. Every line is assigned to each
// block id it mentions; labels come from the anomaly label file
// (block_id,Normal|Anomaly, with an optional header row).
inline std::vector<SequenceRecord> parse_hdfs(const std::string& log_path,
                                              const std::string& label_path,
                                              IngestStats* stats = nullptr) {
    std::map<std::string, int> labels;
    for (const auto& line : detail::read_lines(label_path)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const std::string id = line.substr(0, comma);
        const std::string tag = line.substr(comma + 1);
        if (tag == "Anomaly") labels[id] = 1;
        else if (tag == "Normal") labels[id] = 0;
        // anything else (e.g. the header row) is ignored
    }
    static const std::regex block_re("blk_-?[0-9]+");
    std::map<std::string, std::vector<std::string>> groups;
    std::set<std::string> unlabeled;
    for (const auto& line : detail::read_lines(log_path)) {
        if (stats) ++stats->lines_read;
        std::set<std::string> seen;  // each line counts once per distinct block id
        for (auto it = std::sregex_iterator(line.begin(), line.end(), block_re);
             it != std::sregex_iterator(); ++it)
            seen.insert(it->str());
        for (const auto& id : seen) {
            if (!labels.count(id)) {
                unlabeled.insert(id);
                continue;
            }
            groups[id].push_back(line);
        }
    }
    if (stats) stats->skipped_unlabeled = unlabeled.size();
    std::vector<SequenceRecord> out;
    out.reserve(groups.size());
    for (auto& [id, events] : groups)
        out.push_back({"hdfs", id, std::move(events), labels[id]});
    detail::sort_records(out);
    return out;
}

// OpenStack: sequences are grouped by instance UUID occurrence across the
// given log files (processed in the order supplied); a sequence is anomalous
// iff its UUID appears in the abnormal instance list.
inline std::vector<SequenceRecord> parse_openstack(const std::vector<std::string>& log_paths,
                                                   const std::string& abnormal_path,
                                                   IngestStats* stats = nullptr) {
    std::set<std::string> abnormal;
    static const std::regex uuid_re(
        "[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}");
    for (const auto& line : detail::read_lines(abnormal_path))
        for (auto it = std::sregex_iterator(line.begin(), line.end(), uuid_re);
             it != std::sregex_iterator(); ++it)
            abnormal.insert(it->str());
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& path : log_paths) {
        for (const auto& line : detail::read_lines(path)) {
            if (stats) ++stats->lines_read;
            std::set<std::string> seen;
            for (auto it = std::sregex_iterator(line.begin(), line.end(), uuid_re);
                 it != std::sregex_iterator(); ++it)
                seen.insert(it->str());
            for (const auto& id : seen) groups[id].push_back(line);
        }
    }
    std::vector<SequenceRecord> out;
    out.reserve(groups.size());
    for (auto& [id, events] : groups)
        out.push_back({"openstack", id, std::move(events), abnormal.count(id) ? 1 : 0});
    detail::sort_records(out);
    return out;
}

// Hadoop: one sequence per log file under anomaly-type directories
// (normal, machine_down, network_disconnection, disk_full); the three anomaly
// types collapse to label 1. Over-long sequences are windowed (300/30).
inline std::vector<SequenceRecord> parse_hadoop(const std::string& root_dir,
                                                IngestStats* stats = nullptr) {
    namespace fs = std::filesystem;
    static const std::map<std::string, int> kTypes = {
        {"normal", 0}, {"machine_down", 1}, {"network_disconnection", 1}, {"disk_full", 1}};
    if (!fs::is_directory(root_dir)) throw DataError("not a directory: " + root_dir);
    std::vector<SequenceRecord> out;
    std::vector<fs::path> kinds;
    for (const auto& entry : fs::directory_iterator(root_dir))
        if (entry.is_directory()) kinds.push_back(entry.path());
    std::sort(kinds.begin(), kinds.end());
    const WindowSpec spec{300, 30};
    for (const auto& kind : kinds) {
        const auto it = kTypes.find(kind.filename().string());
        if (it == kTypes.end())
            throw DataError("unknown hadoop anomaly-type directory: " + kind.string());
        const int label = it->second;
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(kind))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            auto events = detail::read_lines(file.string());
            events.erase(std::remove_if(events.begin(), events.end(),
                                        [](const std::string& s) { return s.empty(); }),
                         events.end());
            if (stats) stats->lines_read += events.size();
            if (events.empty()) continue;
            const std::string base = fs::relative(file, root_dir).generic_string();
            for (size_t s : window_starts(events.size(), spec)) {
                const size_t end = std::min(s + spec.window_size, events.size());
                out.push_back({"hadoop", detail::window_id(base, s),
                               std::vector<std::string>(events.begin() + s, events.begin() + end),
                               label});
            }
        }
    }
    detail::sort_records(out);
    return out;
}

// BGL: the chronological event stream is windowed (300/50); lines whose first
// column is "-" are non-alert, anything else is an alert tag. A window is
// anomalous iff it contains any alert line.
inline std::vector<SequenceRecord> parse_bgl(const std::string& log_path,
                                             IngestStats* stats = nullptr) {
    auto lines = detail::read_lines(log_path);
    lines.erase(std::remove_if(lines.begin(), lines.end(),
                               [](const std::string& s) { return s.empty(); }),
                lines.end());
    if (lines.empty()) throw DataError("empty bgl log: " + log_path);
    std::vector<char> alert(lines.size(), 0);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (stats) ++stats->lines_read;
        const auto sp = lines[i].find(' ');
        const std::string tag = lines[i].substr(0, sp);
        if (tag.empty()) {
            if (stats) ++stats->malformed_lines;
            continue;  // treated as non-alert
        }
        alert[i] = tag != "-";
    }
    const WindowSpec spec{300, 50};
    std::vector<SequenceRecord> out;
    for (size_t s : window_starts(lines.size(), spec)) {
        const size_t end = std::min(s + spec.window_size, lines.size());
        int label = 0;
        for (size_t i = s; i < end; ++i)
            if (alert[i]) {
                label = 1;
                break;
            }
        out.push_back({"bgl", detail::window_id("bgl", s),
                       std::vector<std::string>(lines.begin() + s, lines.begin() + end), label});
    }
    detail::sort_records(out);
    return out;
}

}  // namespace hierlog
