// hierlog: end-to-end log anomaly detection pipeline.
// Subcommands: ingest, synth, mix, evolve, train, eval, report, run.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hierlog/experiment.hpp"
#include "hierlog/synth.hpp"

namespace {

std::string data_root() {
    const char* env = std::getenv("HIERLOG_DATA");
    return env ? env : "";
}

std::string resolve(const std::string& path) {
    if (path.empty() || path[0] == '/' || data_root().empty()) return path;
    return data_root() + "/" + path;
}

int run_ingest(const std::string& dataset, const std::string& input, const std::string& labels,
               const std::string& out) {
    hierlog::IngestStats stats;
    std::vector<hierlog::SequenceRecord> records;
    if (dataset == "hdfs") {
        if (labels.empty()) throw hierlog::ConfigError("hdfs ingest requires --labels");
        records = hierlog::parse_hdfs(resolve(input), resolve(labels), &stats);
    } else if (dataset == "openstack") {
        if (labels.empty()) throw hierlog::ConfigError("openstack ingest requires --labels");
        std::vector<std::string> files;
        namespace fs = std::filesystem;
        if (fs::is_directory(resolve(input))) {
            for (const auto& e : fs::directory_iterator(resolve(input)))
                if (e.is_regular_file()) files.push_back(e.path().string());
            std::sort(files.begin(), files.end());
        } else {
            files.push_back(resolve(input));
        }
        records = hierlog::parse_openstack(files, resolve(labels), &stats);
    } else if (dataset == "hadoop") {
        records = hierlog::parse_hadoop(resolve(input), &stats);
    } else if (dataset == "bgl") {
        records = hierlog::parse_bgl(resolve(input), &stats);
    } else {
        throw hierlog::ConfigError("unknown dataset: " + dataset +
                                   " (expected hdfs, openstack, hadoop, or bgl)");
    }
    hierlog::write_records(out, records);
    size_t anomalies = 0;
    for (const auto& r : records) anomalies += r.label;
    std::cerr << dataset << ": " << records.size() << " sequences (" << anomalies
              << " anomaly, " << records.size() - anomalies << " non-anomaly), "
              << stats.lines_read << " lines read";
    if (stats.skipped_unlabeled) std::cerr << ", " << stats.skipped_unlabeled << " unlabeled ids skipped";
    if (stats.malformed_lines) std::cerr << ", " << stats.malformed_lines << " malformed lines";
    std::cerr << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical char-CNN log anomaly detection pipeline"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse a raw corpus into labeled sequences");
    std::string in_dataset, in_input, in_labels, in_out;
    ingest->add_option("--dataset", in_dataset, "hdfs | openstack | hadoop | bgl")->required();
    ingest->add_option("--input", in_input, "log file or directory")->required();
    ingest->add_option("--labels", in_labels, "label / abnormal-id file (hdfs, openstack)");
    ingest->add_option("--out", in_out, "output records file")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic planted-token corpus");
    hierlog::SynthConfig synth_cfg;
    std::string synth_out;
    synth->add_option("--count", synth_cfg.count, "number of sequences");
    synth->add_option("--anomaly-fraction", synth_cfg.anomaly_fraction, "fraction labeled 1");
    synth->add_option("--seed", synth_cfg.seed, "rng seed");
    synth->add_option("--min-events", synth_cfg.min_events, "minimum events per sequence");
    synth->add_option("--max-events", synth_cfg.max_events, "maximum events per sequence");
    synth->add_option("--dataset", synth_cfg.dataset, "dataset tag");
    synth->add_option("--out", synth_out, "output records file")->required();

    // mix
    auto* mixcmd = app.add_subcommand("mix", "compose a multi-project training set");
    std::string mix_spec_path, mix_out;
    std::vector<std::string> mix_overrides;
    mixcmd->add_option("--spec", mix_spec_path, "experiment config file")->required();
    mixcmd->add_option("--set", mix_overrides, "override key=value");
    mixcmd->add_option("--out", mix_out, "output records file")->required();

    // evolve
    auto* evolvecmd = app.add_subcommand("evolve", "apply synthetic log evolution noise");
    std::string ev_in, ev_out;
    hierlog::EvolutionConfig ev_cfg;
    evolvecmd->add_option("--in", ev_in, "input records")->required();
    evolvecmd->add_option("--out", ev_out, "output records")->required();
    evolvecmd->add_option("--noise-ratio", ev_cfg.noise_ratio, "edits per event count");
    evolvecmd->add_option("--seed", ev_cfg.seed, "rng seed");
    evolvecmd->add_option("--shuffle-window-max", ev_cfg.shuffle_window_max, "max shuffle width");

    // train
    auto* traincmd = app.add_subcommand("train", "train a model on a records file");
    std::string tr_config, tr_train, tr_out;
    std::vector<std::string> tr_tests, tr_overrides;
    traincmd->add_option("--config", tr_config, "experiment config file")->required();
    traincmd->add_option("--train", tr_train, "training records")->required();
    traincmd->add_option("--test", tr_tests, "test records file(s), evaluated per epoch");
    traincmd->add_option("--set", tr_overrides, "override key=value");
    traincmd->add_option("--out", tr_out, "output directory")->required();

    // eval
    auto* evalcmd = app.add_subcommand("eval", "evaluate a checkpoint on a records file");
    std::string eval_model, eval_test;
    double eval_threshold = 0.5;
    evalcmd->add_option("--model", eval_model, "checkpoint path")->required();
    evalcmd->add_option("--test", eval_test, "test records")->required();
    evalcmd->add_option("--threshold", eval_threshold, "decision threshold");

    // report
    auto* reportcmd = app.add_subcommand("report", "render a history CSV as tables");
    std::string rep_history;
    reportcmd->add_option("--history", rep_history, "history.csv from train/run")->required();

    // run
    auto* runcmd = app.add_subcommand("run", "run a full experiment from a config file");
    std::string run_config, run_out;
    std::vector<std::string> run_overrides;
    runcmd->add_option("--config", run_config, "experiment config file")->required();
    runcmd->add_option("--set", run_overrides, "override key=value");
    runcmd->add_option("--out", run_out, "output directory (overrides experiment.out)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return run_ingest(in_dataset, in_input, in_labels, in_out);
        if (*synth) {
            hierlog::write_records(synth_out, hierlog::generate_synthetic(synth_cfg));
            return 0;
        }
        if (*mixcmd) {
            auto spec = hierlog::load_spec(mix_spec_path, mix_overrides);
            std::map<std::string, std::vector<hierlog::SequenceRecord>> halves;
            for (const auto& [name, path] : spec.data)
                halves[name] = hierlog::read_records(resolve(path));
            hierlog::write_records(mix_out,
                                   hierlog::compose_multi_project(halves, spec.mix, spec.seed));
            return 0;
        }
        if (*evolvecmd) {
            size_t skipped = 0;
            auto records = hierlog::read_records(resolve(ev_in));
            hierlog::write_records(ev_out, hierlog::evolve_records(records, ev_cfg, &skipped));
            if (skipped)
                std::cerr << skipped << " sequences too short to evolve, passed through\n";
            return 0;
        }
        if (*traincmd) {
            auto spec = hierlog::load_spec(tr_config, tr_overrides);
            auto train_records = hierlog::read_records(resolve(tr_train));
            std::map<std::string, std::vector<hierlog::SequenceRecord>> tests;
            for (const auto& path : tr_tests) {
                auto recs = hierlog::read_records(resolve(path));
                std::string name = recs.empty() ? path : recs.front().dataset;
                tests[name] = std::move(recs);
            }
            hierlog::Model model(spec.model, spec.seed);
            auto result = hierlog::train(model, train_records, spec.train,
                                         hierlog::class_weight(train_records), tests, tr_out);
            hierlog::write_history_csv(tr_out + "/history.csv", result.history);
            if (!result.history.empty())
                hierlog::print_report(std::cout, result.history.back().report);
            return 0;
        }
        if (*evalcmd) {
            auto model = hierlog::Model::load(resolve(eval_model));
            auto records = hierlog::read_records(resolve(eval_test));
            hierlog::print_report(std::cout,
                                  hierlog::evaluate(model, records, eval_threshold));
            return 0;
        }
        if (*reportcmd) {
            auto history = hierlog::read_history_csv(resolve(rep_history));
            for (const auto& entry : history) {
                std::cout << "epoch " << entry.epoch << "\n";
                hierlog::print_report(std::cout, entry.report);
            }
            return 0;
        }
        if (*runcmd) {
            auto spec = hierlog::load_spec(run_config, run_overrides);
            if (!run_out.empty()) spec.out_dir = run_out;
            for (auto& [name, path] : spec.data) path = resolve(path);
            hierlog::run_experiment(spec);
            std::cout << "experiment complete: " << spec.out_dir << "\n";
            return 0;
        }
    } catch (const hierlog::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hierlog::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const hierlog::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
