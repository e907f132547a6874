#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hierlog/mixer.hpp"
#include "hierlog/model.hpp"

namespace hierlog {

struct TrainConfig {
    size_t batch_size = 32;
    size_t epochs = 70;
    uint64_t seed = 0;
    AdamConfig optimizer;
    double threshold = 0.5;
    bool verbose = false;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
    }
};

struct Metrics {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;

    double precision() const {
        return tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    }
    double recall() const {
        return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    double accuracy() const {
        const size_t n = tp + fp + tn + fn;
        return n > 0 ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
    }
};

// Per-dataset metrics for one evaluation pass.
using EvalReport = std::map<std::string, Metrics>;

struct EpochEntry {
    size_t epoch = 0;  // 1-based
    EvalReport report;
    double train_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochEntry> history;
    size_t best_epoch = 0;  // 1-based, by mean F1 over evaluated datasets
    double best_mean_f1 = -1.0;
};

// Hard-prediction confusion counts per source dataset.
inline EvalReport evaluate(const Model& model, const std::vector<SequenceRecord>& records,
                           double threshold = 0.5) {
    EvalReport report;
    NoGradGuard no_grad;
    for (const auto& r : records) {
        auto enc = encode_sequence(r, model.config());
        Tape t;
        const double p = model.forward(t, enc)->data[0];
        const int pred = predict(p, threshold);
        Metrics& m = report[r.dataset];
        if (r.label == 1)
            (pred == 1 ? m.tp : m.fn)++;
        else
            (pred == 1 ? m.fp : m.tn)++;
    }
    return report;
}

inline double mean_f1(const EvalReport& report) {
    if (report.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& [name, m] : report) acc += m.f1();
    return acc / static_cast<double>(report.size());
}

// Mini-batch Adam on weighted BCE. Evaluates every registered test set after
// each epoch; when out_dir is non-empty, writes a checkpoint per epoch plus
// best.ckpt at the best mean F1 so far.
inline TrainResult train(Model& model, const std::vector<SequenceRecord>& train_records,
                         const TrainConfig& config, double positive_weight,
                         const std::map<std::string, std::vector<SequenceRecord>>& test_sets = {},
                         const std::string& out_dir = "", AdamState* state = nullptr) {
    config.validate();
    if (train_records.empty()) throw ConfigError("train: empty training set");
    AdamState local_state(config.optimizer);
    AdamState& opt = state ? *state : local_state;
    NamedParams params = model.parameters();
    TrainResult result;
    std::vector<size_t> order(train_records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, "epoch/" + std::to_string(epoch)));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t n_batches = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t end = std::min(start + config.batch_size, order.size());
            std::vector<EncodedSequence> batch;
            std::vector<double> labels;
            batch.reserve(end - start);
            for (size_t k = start; k < end; ++k) {
                batch.push_back(encode_sequence(train_records[order[k]], model.config()));
                labels.push_back(static_cast<double>(train_records[order[k]].label));
            }
            model.zero_grads();
            Tape tape;
            auto probs = model.forward_batch(tape, batch);
            auto loss = weighted_bce_loss(tape, probs, labels, positive_weight);
            const double loss_val = loss->data[0];
            if (!std::isfinite(loss_val)) {
                std::string ids;
                for (size_t k = start; k < end; ++k)
                    ids += (ids.empty() ? "" : ", ") + train_records[order[k]].sequence_id;
                double pnorm = 0.0;
                for (const auto& [name, t] : params)
                    for (double v : t->data) pnorm += v * v;
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                    " (batch ids: " + ids +
                                    "; parameter norm: " + std::to_string(std::sqrt(pnorm)) + ")");
            }
            tape.backward(loss);
            opt.step(params);
            epoch_loss += loss_val;
            ++n_batches;
        }
        EpochEntry entry;
        entry.epoch = epoch;
        entry.train_loss = epoch_loss / static_cast<double>(n_batches);
        for (const auto& [name, records] : test_sets) {
            auto rep = evaluate(model, records, config.threshold);
            for (auto& [ds, m] : rep) entry.report[name.empty() ? ds : name] = m;
        }
        const double mf1 = mean_f1(entry.report);
        if (!out_dir.empty()) {
            namespace fs = std::filesystem;
            fs::create_directories(out_dir);
            model.save(out_dir + "/epoch_" + std::to_string(epoch) + ".ckpt");
            if (mf1 > result.best_mean_f1) model.save(out_dir + "/best.ckpt");
        }
        if (mf1 > result.best_mean_f1) {
            result.best_mean_f1 = mf1;
            result.best_epoch = epoch;
        }
        if (config.verbose) {
            std::fprintf(stderr, "epoch %zu loss %.6f", epoch, entry.train_loss);
            for (const auto& [name, m] : entry.report)
                std::fprintf(stderr, " %s F1 %.4f", name.c_str(), m.f1());
            std::fprintf(stderr, "\n");
        }
        result.history.push_back(std::move(entry));
    }
    return result;
}

// CSV: epoch,dataset,precision,recall,f1,tp,fp,tn,fn with 6-decimal fixed
// formatting. Emits the header even for an empty history.
inline void write_history_csv(std::ostream& os, const std::vector<EpochEntry>& history) {
    os << "epoch,dataset,precision,recall,f1,tp,fp,tn,fn\n";
    char buf[64];
    for (const auto& entry : history) {
        for (const auto& [name, m] : entry.report) {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f", m.precision(), m.recall(), m.f1());
            os << entry.epoch << "," << name << "," << buf << "," << m.tp << "," << m.fp << ","
               << m.tn << "," << m.fn << "\n";
        }
    }
}

inline void write_history_csv(const std::string& path, const std::vector<EpochEntry>& history) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_history_csv(os, history);
}

// Renders an EvalReport as an aligned text table.
inline void print_report(std::ostream& os, const EvalReport& report) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %10s %10s %10s %8s %8s %8s %8s", "dataset",
                  "precision", "recall", "f1", "tp", "fp", "tn", "fn");
    os << buf << "\n";
    for (const auto& [name, m] : report) {
        std::snprintf(buf, sizeof(buf), "%-12s %10.4f %10.4f %10.4f %8zu %8zu %8zu %8zu",
                      name.c_str(), m.precision(), m.recall(), m.f1(), m.tp, m.fp, m.tn, m.fn);
        os << buf << "\n";
    }
}

// Parses a history CSV produced by write_history_csv.
inline std::vector<EpochEntry> read_history_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open history csv: " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty history csv: " + path);
    std::vector<EpochEntry> history;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() != 9) throw DataError("bad history row: " + line);
        const size_t epoch = std::stoull(cols[0]);
        if (history.empty() || history.back().epoch != epoch) {
            history.push_back(EpochEntry{});
            history.back().epoch = epoch;
        }
        Metrics m;
        m.tp = std::stoull(cols[5]);
        m.fp = std::stoull(cols[6]);
        m.tn = std::stoull(cols[7]);
        m.fn = std::stoull(cols[8]);
        history.back().report[cols[1]] = m;
    }
    return history;
}

}  // namespace hierlog
