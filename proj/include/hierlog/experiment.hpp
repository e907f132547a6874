#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hierlog/evolve.hpp"
#include "hierlog/ingest.hpp"
#include "hierlog/trainer.hpp"

namespace hierlog {

enum class ExperimentKind { SingleProject, MultiProject, Robustness };

inline ExperimentKind parse_kind(const std::string& s) {
    if (s == "single-project") return ExperimentKind::SingleProject;
    if (s == "multi-project") return ExperimentKind::MultiProject;
    if (s == "robustness") return ExperimentKind::Robustness;
    throw ConfigError("unknown experiment kind: " + s);
}

inline std::string kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::SingleProject: return "single-project";
        case ExperimentKind::MultiProject: return "multi-project";
        default: return "robustness";
    }
}

// One fully resolved experiment: config file plus CLI overrides.
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::SingleProject;
    uint64_t seed = 0;
    std::string out_dir;
    std::map<std::string, std::string> data;  // dataset tag -> records file
    ModelConfig model;
    TrainConfig train;
    SplitSpec split;
    MixSpec mix;
    EvolutionConfig evolve;
    std::string resolved_text;  // canonical key=value dump, hashed into the manifest
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// key = value lines, '#' comments. Later duplicates override earlier ones.
inline std::map<std::string, std::string> parse_kv(std::istream& is, const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + v);
    }
}

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const uint64_t u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": " + v);
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("bad boolean value for " + key + ": " + v);
}

inline uint64_t file_content_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open input for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
        h = fnv1a64(std::string_view(buf, static_cast<size_t>(is.gcount())), h);
    return h;
}

}  // namespace detail

// Builds a spec from a key-value map. Every key must be known; unknown keys
// are rejected rather than ignored.
inline ExperimentSpec spec_from_kv(std::map<std::string, std::string> kv) {
    ExperimentSpec spec;
    auto take = [&kv](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) return std::string();
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    if (auto v = take("experiment.kind"); !v.empty()) spec.kind = parse_kind(v);
    if (auto v = take("experiment.seed"); !v.empty())
        spec.seed = detail::parse_u64("experiment.seed", v);
    spec.out_dir = take("experiment.out");

    for (auto it = kv.begin(); it != kv.end();) {
        if (it->first.rfind("data.", 0) == 0) {
            spec.data[it->first.substr(5)] = it->second;
            it = kv.erase(it);
        } else if (it->first.rfind("mix.", 0) == 0) {
            spec.mix.fractions[it->first.substr(4)] =
                detail::parse_double(it->first, it->second);
            it = kv.erase(it);
        } else {
            ++it;
        }
    }

    std::string model_text;
    for (const char* key :
         {"max_events", "max_chars", "embed_dim", "event_widths", "event_kernels", "seq_widths",
          "seq_kernels", "dense_widths", "vocabulary_size"}) {
        if (auto v = take(std::string("model.") + key); !v.empty())
            model_text += std::string(key) + " = " + v + "\n";
    }
    if (!model_text.empty()) {
        // defaults first, overrides second
        spec.model = config_from_text(config_to_text(ModelConfig{}) + model_text);
    }

    if (auto v = take("train.batch_size"); !v.empty())
        spec.train.batch_size = detail::parse_u64("train.batch_size", v);
    if (auto v = take("train.epochs"); !v.empty())
        spec.train.epochs = detail::parse_u64("train.epochs", v);
    if (auto v = take("train.lr"); !v.empty())
        spec.train.optimizer.lr = detail::parse_double("train.lr", v);
    if (auto v = take("train.threshold"); !v.empty())
        spec.train.threshold = detail::parse_double("train.threshold", v);
    if (auto v = take("train.verbose"); !v.empty())
        spec.train.verbose = detail::parse_bool("train.verbose", v);

    if (auto v = take("split.train_fraction"); !v.empty())
        spec.split.train_fraction = detail::parse_double("split.train_fraction", v);
    if (auto v = take("split.stratified"); !v.empty())
        spec.split.stratified = detail::parse_bool("split.stratified", v);

    if (auto v = take("evolve.noise_ratio"); !v.empty())
        spec.evolve.noise_ratio = detail::parse_double("evolve.noise_ratio", v);
    if (auto v = take("evolve.shuffle_window_max"); !v.empty())
        spec.evolve.shuffle_window_max = detail::parse_u64("evolve.shuffle_window_max", v);
    if (auto v = take("evolve.duplicate"); !v.empty())
        spec.evolve.enable_duplicate = detail::parse_bool("evolve.duplicate", v);
    if (auto v = take("evolve.remove"); !v.empty())
        spec.evolve.enable_remove = detail::parse_bool("evolve.remove", v);
    if (auto v = take("evolve.shuffle"); !v.empty())
        spec.evolve.enable_shuffle = detail::parse_bool("evolve.shuffle", v);

    if (!kv.empty()) {
        std::string keys;
        for (const auto& [k, v] : kv) keys += (keys.empty() ? "" : ", ") + k;
        throw ConfigError("unknown config keys: " + keys);
    }

    spec.split.seed = spec.seed;
    spec.evolve.seed = spec.seed;
    spec.train.seed = spec.seed;
    spec.model.validate();
    spec.split.validate();
    spec.mix.validate();
    spec.evolve.validate();
    spec.train.validate();

    std::ostringstream os;
    os << "experiment.kind = " << kind_name(spec.kind) << "\n";
    os << "experiment.seed = " << spec.seed << "\n";
    for (const auto& [name, path] : spec.data) os << "data." << name << " = " << path << "\n";
    std::istringstream model_is(config_to_text(spec.model));
    std::string l;
    while (std::getline(model_is, l)) os << "model." << l << "\n";
    os << "train.batch_size = " << spec.train.batch_size << "\n";
    os << "train.epochs = " << spec.train.epochs << "\n";
    os << "train.lr = " << spec.train.optimizer.lr << "\n";
    os << "train.threshold = " << spec.train.threshold << "\n";
    os << "split.train_fraction = " << spec.split.train_fraction << "\n";
    os << "split.stratified = " << (spec.split.stratified ? "true" : "false") << "\n";
    for (const auto& [name, f] : spec.mix.fractions) os << "mix." << name << " = " << f << "\n";
    os << "evolve.noise_ratio = " << spec.evolve.noise_ratio << "\n";
    os << "evolve.shuffle_window_max = " << spec.evolve.shuffle_window_max << "\n";
    spec.resolved_text = os.str();
    return spec;
}

inline ExperimentSpec load_spec(const std::string& config_path,
                                const std::vector<std::string>& overrides = {}) {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open config file: " + config_path);
    auto kv = detail::parse_kv(is, config_path);
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("override must be key=value: " + ov);
        kv[detail::trim(ov.substr(0, eq))] = detail::trim(ov.substr(eq + 1));
    }
    return spec_from_kv(std::move(kv));
}

// Runs one experiment end to end and writes every artifact plus a manifest
// under spec.out_dir. On failure the manifest records the failed stage and
// partial artifacts are retained.
inline TrainResult run_experiment(const ExperimentSpec& spec) {
    namespace fs = std::filesystem;
    if (spec.out_dir.empty()) throw ConfigError("experiment.out directory is required");
    if (spec.data.empty()) throw ConfigError("at least one data.<name> input is required");
    if (spec.kind == ExperimentKind::SingleProject && spec.data.size() != 1)
        throw ConfigError("single-project experiment takes exactly one data.<name> input");
    fs::create_directories(spec.out_dir);

    nlohmann::json manifest;
    manifest["kind"] = kind_name(spec.kind);
    manifest["seed"] = spec.seed;
    manifest["config"] = spec.resolved_text;
    manifest["config_hash"] =
        (std::ostringstream() << std::hex << fnv1a64(spec.resolved_text)).str();
    manifest["status"] = "running";
    auto flush_manifest = [&manifest, &spec] {
        std::ofstream os(spec.out_dir + "/manifest.json", std::ios::binary);
        os << manifest.dump(2) << "\n";
    };

    std::string stage = "load";
    try {
        std::map<std::string, std::vector<SequenceRecord>> inputs;
        for (const auto& [name, path] : spec.data) {
            manifest["inputs"][name]["path"] = path;
            manifest["inputs"][name]["fnv1a64"] =
                (std::ostringstream() << std::hex << detail::file_content_hash(path)).str();
            auto records = read_records(path);
            // single-project Hadoop is inverted so "anomaly" stays the
            // minority semantics of an anomaly detection task
            if (name == "hadoop" && spec.kind != ExperimentKind::MultiProject)
                records = invert_labels(std::move(records));
            inputs[name] = std::move(records);
        }
        flush_manifest();

        stage = "split";
        std::map<std::string, std::vector<SequenceRecord>> train_halves, test_halves;
        for (auto& [name, records] : inputs) {
            auto sr = split(records, spec.split);
            if (sr.stratification_fallback)
                std::fprintf(stderr, "warning: %s: degenerate stratum, unstratified split\n",
                             name.c_str());
            train_halves[name] = std::move(sr.train);
            test_halves[name] = std::move(sr.test);
            write_records(spec.out_dir + "/test_" + name + ".jsonl", test_halves[name]);
        }

        stage = "compose";
        std::vector<SequenceRecord> train_set;
        if (spec.kind == ExperimentKind::MultiProject || train_halves.size() > 1) {
            train_set = compose_multi_project(train_halves, spec.mix, spec.seed);
        } else {
            train_set = train_halves.begin()->second;
        }
        write_records(spec.out_dir + "/train.jsonl", train_set);
        const double pos_weight = class_weight(train_set);
        manifest["positive_weight"] = pos_weight;
        flush_manifest();

        stage = "train";
        Model model(spec.model, spec.seed);
        auto result =
            train(model, train_set, spec.train, pos_weight, test_halves, spec.out_dir);
        write_history_csv(spec.out_dir + "/history.csv", result.history);
        manifest["best_epoch"] = result.best_epoch;
        manifest["best_mean_f1"] = result.best_mean_f1;

        stage = "evaluate";
        std::vector<EpochEntry> final_rows;
        EpochEntry final_entry;
        final_entry.epoch = spec.train.epochs;
        for (const auto& [name, records] : test_halves)
            for (const auto& [ds, m] : evaluate(model, records, spec.train.threshold))
                final_entry.report[name] = m;
        final_rows.push_back(final_entry);
        write_history_csv(spec.out_dir + "/results.csv", final_rows);

        if (spec.kind == ExperimentKind::Robustness) {
            stage = "evolve";
            std::vector<EpochEntry> evolved_rows;
            EpochEntry evolved_entry;
            evolved_entry.epoch = spec.train.epochs;
            for (const auto& [name, records] : test_halves) {
                auto evolved = evolve_records(records, spec.evolve);
                write_records(spec.out_dir + "/evolved_" + name + ".jsonl", evolved);
                for (const auto& [ds, m] : evaluate(model, evolved, spec.train.threshold))
                    evolved_entry.report[name] = m;
            }
            evolved_rows.push_back(evolved_entry);
            write_history_csv(spec.out_dir + "/results_evolved.csv", evolved_rows);
        }

        manifest["status"] = "ok";
        flush_manifest();
        return result;
    } catch (...) {
        manifest["status"] = "failed";
        manifest["failed_stage"] = stage;
        flush_manifest();
        throw;
    }
}

}  // namespace hierlog
