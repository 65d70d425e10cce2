#include "gaitnirs/errors.hpp"
#include "gaitnirs/harness.hpp"
#include "gaitnirs/textio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <iostream>

namespace fs = std::filesystem;
using namespace gaitnirs;

namespace {

ConfigFile load_config(const std::string& path) {
    if (path.empty()) return ConfigFile{};
    return ConfigFile::parse_file(path);
}

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> out;
    for (const auto& part : split_csv(csv)) {
        long long v = parse_int(part, "--seed");
        if (v < 0) throw ConfigError("--seed values must be non-negative, got " + part);
        out.push_back(static_cast<uint64_t>(v));
    }
    if (out.empty()) throw ConfigError("--seed needs at least one value");
    return out;
}

bool parse_split_mode(const std::string& mode) {
    if (mode == "row") return false;
    if (mode == "subject") return true;
    throw ConfigError("--split-mode must be 'row' or 'subject', got '" + mode + "'");
}

std::vector<SubjectEpochs> load_epochs_dir(const fs::path& dir,
                                           const std::vector<SubjectMeta>& subjects) {
    if (!fs::is_directory(dir)) throw DataError("epochs directory not found: " + dir.string());
    std::vector<SubjectEpochs> out;
    for (const auto& s : subjects) {
        fs::path p = dir / (s.subject_id + "_epochs.csv");
        if (!fs::exists(p)) continue; // recorded as an exclusion downstream
        SubjectEpochs se;
        se.subject_id = s.subject_id;
        se.epochs = epochs_from_csv(read_text_file(p), s.subject_id, p.string());
        out.push_back(std::move(se));
    }
    return out;
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Cli {
    std::string config_path;
    std::string seed_csv;
    std::string out;
    std::string split_mode = "row";
    bool quiet = false;

    // per-verb inputs
    std::string in_dir;
    std::string subjects_file;
    std::string features_file;
    std::string model_file;
    std::string report_file;
    std::string algo = "lr";
    double horizon = 60.0;
    double split_fraction = 0.2;
    long long n_subjects = -1;
    bool skip_synth = false;
};

ExperimentConfig experiment_from(const Cli& cli) {
    ConfigFile cfg = load_config(cli.config_path);
    ExperimentConfig e = ExperimentConfig::from_config(cfg);
    if (!cli.seed_csv.empty()) e.seeds = parse_seed_list(cli.seed_csv);
    e.subject_mode = parse_split_mode(cli.split_mode);
    if (cli.n_subjects >= 0) e.n_subjects = static_cast<size_t>(cli.n_subjects);
    e.validate();
    return e;
}

void emit_partial(const ExperimentConfig& cfg, ReportDoc&& doc, const fs::path& out_dir) {
    doc.config_hash = cfg.config_hash();
    doc.seeds = cfg.seeds;
    cfg.to_kv(doc.config_kv);
    emit_report(doc, out_dir);
}

int run_verbs(CLI::App& app, Cli& cli) {
    if (app.got_subcommand("synth")) {
        ConfigFile cfg = load_config(cli.config_path);
        ExperimentConfig e = ExperimentConfig::from_config(cfg);
        size_t n = cli.n_subjects >= 0 ? static_cast<size_t>(cli.n_subjects) : e.n_subjects;
        uint64_t seed = cli.seed_csv.empty() ? e.synth_seed : parse_seed_list(cli.seed_csv)[0];
        auto cohort = generate_cohort(n, seed, e.effect, e.pipeline.mbll);
        write_synth_cohort(cli.out, cohort);
        if (!cli.quiet)
            std::cerr << "[gaitnirs] wrote " << cohort.size() << " subjects to " << cli.out
                      << "\n";
        return 0;
    }
    if (app.got_subcommand("preprocess")) {
        ConfigFile cfgf = load_config(cli.config_path);
        PipelineConfig pipeline = PipelineConfig::from_config(cfgf);
        Cohort cohort = load_cohort(cli.in_dir);
        ValidationReport vr = validate_cohort(cohort.subjects, cohort.recordings);
        for (const auto& w : vr.warnings())
            if (!cli.quiet) std::cerr << "[gaitnirs] warning: " << w.subject_id << ": " << w.reason << "\n";
        if (!vr.passed) {
            const auto fails = vr.failures();
            throw DataError(fails[0].subject_id + ": " + fails[0].reason);
        }
        PreprocessResult pre = preprocess_cohort(cohort, pipeline);
        fs::create_directories(cli.out);
        for (const auto& se : pre.epochs)
            write_text_file(fs::path(cli.out) / (se.subject_id + "_epochs.csv"),
                            epochs_to_csv(se.epochs));
        write_text_file(fs::path(cli.out) / "exclusions.csv", exclusions_to_csv(pre.exclusions));
        if (!cli.quiet)
            std::cerr << "[gaitnirs] " << pre.epochs.size() << " subjects preprocessed, "
                      << pre.exclusions.size() << " excluded\n";
        return 0;
    }
    if (app.got_subcommand("features")) {
        auto subjects = load_subjects_csv(cli.subjects_file);
        auto epochs = load_epochs_dir(cli.in_dir, subjects);
        FeatureExtraction fx = extract_features(subjects, epochs, cli.horizon);
        write_features_csv(cli.out, fx.rows);
        if (!cli.quiet) {
            std::cerr << "[gaitnirs] " << fx.rows.size() << " feature rows -> " << cli.out << "\n";
            for (const auto& ex : fx.exclusions)
                std::cerr << "[gaitnirs] excluded " << ex.subject_id << " (" << ex.stage
                          << "): " << ex.reason << "\n";
        }
        return 0;
    }
    if (app.got_subcommand("train")) {
        auto seeds = cli.seed_csv.empty() ? std::vector<uint64_t>{1} : parse_seed_list(cli.seed_csv);
        if (seeds.size() != 1) throw ConfigError("train takes a single --seed value");
        AlgorithmSpec spec = AlgorithmSpec::parse(cli.algo);
        auto rows = load_features_csv(cli.features_file);
        FeatureMask mask = full_mask();
        Dataset ds = make_dataset(rows, mask);
        bool subject_mode = parse_split_mode(cli.split_mode);
        auto [train_ds, test_ds] = split_dataset(ds, cli.split_fraction, seeds[0], subject_mode);
        double t0 = now_ms();
        TrainedModel model = train(spec, train_ds, seeds[0]);
        model.train_time_ms = now_ms() - t0;
        model.mask_bits = mask_to_bits(mask);
        model.split = {seeds[0], subject_mode, cli.split_fraction};
        save_model(cli.out, model);
        if (!cli.quiet)
            std::cerr << "[gaitnirs] " << spec.id() << " trained on " << train_ds.size()
                      << " rows (test accuracy " << fmt_double(dataset_accuracy(model, test_ds))
                      << ") -> " << cli.out << "\n";
        return 0;
    }
    if (app.got_subcommand("evaluate")) {
        TrainedModel model = load_model(cli.model_file);
        auto rows = load_features_csv(cli.features_file);
        Dataset ds = make_dataset(rows, mask_from_bits(model.mask_bits));
        auto [train_ds, test_ds] =
            split_dataset(ds, model.split.test_fraction, model.split.seed,
                          model.split.subject_mode);
        (void)train_ds;
        EvalReport er = evaluate(model, test_ds);
        nlohmann::ordered_json rep = {{"algorithm", er.algorithm},
                                      {"accuracy", er.accuracy},
                                      {"train_time_ms", er.train_time_ms},
                                      {"test_time_ms_per_1000", er.test_time_ms_per_1000}};
        if (!cli.report_file.empty()) write_text_file(cli.report_file, rep.dump(2) + "\n");
        std::cout << rep.dump(2) << "\n";
        return 0;
    }
    if (app.got_subcommand("sweep")) {
        ExperimentConfig e = experiment_from(cli);
        auto rows = load_features_csv(cli.features_file);
        ReportDoc doc;
        doc.sweep = run_sweep(e, rows);
        emit_partial(e, std::move(doc), cli.out);
        return 0;
    }
    if (app.got_subcommand("ablation")) {
        ExperimentConfig e = experiment_from(cli);
        auto rows = load_features_csv(cli.features_file);
        ReportDoc doc;
        doc.ablation = run_ablation(e, rows);
        emit_partial(e, std::move(doc), cli.out);
        return 0;
    }
    if (app.got_subcommand("reduce-subjects")) {
        ExperimentConfig e = experiment_from(cli);
        auto rows = load_features_csv(cli.features_file);
        ReportDoc doc;
        doc.subject_reduction = run_subject_reduction(e, rows);
        emit_partial(e, std::move(doc), cli.out);
        return 0;
    }
    if (app.got_subcommand("reduce-horizon")) {
        ExperimentConfig e = experiment_from(cli);
        auto subjects = load_subjects_csv(cli.subjects_file);
        auto epochs = load_epochs_dir(cli.in_dir, subjects);
        ReportDoc doc;
        doc.horizon_reduction = run_timelength_reduction(e, subjects, epochs);
        emit_partial(e, std::move(doc), cli.out);
        return 0;
    }
    if (app.got_subcommand("all")) {
        ExperimentConfig e = experiment_from(cli);
        run_all(e, cli.out, cli.skip_synth, cli.quiet);
        return 0;
    }
    throw ConfigError("no verb given");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fNIRS walking-task pipeline: synthetic cohorts, preprocessing, statistical "
                 "features, native classifiers and reproducible experiment reports"};
    app.require_subcommand(1);
    Cli cli;

    app.add_option("--config", cli.config_path, "key = value config file");
    app.add_option("--seed", cli.seed_csv, "seed or comma-separated seed list");
    app.add_option("--out", cli.out, "output file or directory");
    app.add_option("--split-mode", cli.split_mode, "row|subject split mode");
    app.add_flag("--quiet", cli.quiet, "suppress progress output");

    auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
    synth->add_option("--n", cli.n_subjects, "number of subjects");
    auto* preprocess = app.add_subcommand("preprocess", "raw intensities -> task epochs");
    preprocess->add_option("--in", cli.in_dir, "cohort directory")->required();
    auto* features = app.add_subcommand("features", "task epochs -> encoded feature table");
    features->add_option("--in", cli.in_dir, "epochs directory")->required();
    features->add_option("--subjects", cli.subjects_file, "subjects.csv")->required();
    features->add_option("--horizon", cli.horizon, "observation window in seconds");
    auto* train_cmd = app.add_subcommand("train", "train one classifier");
    train_cmd->add_option("--features", cli.features_file, "features.csv")->required();
    train_cmd->add_option("--algo", cli.algo,
                          "lr|dt|rf:N|svm|knn:K|mlp:H[,H...]")->required();
    train_cmd->add_option("--split", cli.split_fraction, "held-out test fraction");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a saved model");
    evaluate_cmd->add_option("--model", cli.model_file, "model file")->required();
    evaluate_cmd->add_option("--features", cli.features_file, "features.csv")->required();
    evaluate_cmd->add_option("--report", cli.report_file, "JSON report path");
    auto* sweep_cmd = app.add_subcommand("sweep", "11-configuration algorithm sweep");
    sweep_cmd->add_option("--features", cli.features_file, "features.csv")->required();
    auto* ablation_cmd = app.add_subcommand("ablation", "feature-subset ablation (7 masks)");
    ablation_cmd->add_option("--features", cli.features_file, "features.csv")->required();
    auto* rsub = app.add_subcommand("reduce-subjects", "accuracy vs cohort fraction");
    rsub->add_option("--features", cli.features_file, "features.csv")->required();
    auto* rhor = app.add_subcommand("reduce-horizon", "accuracy vs observation window");
    rhor->add_option("--in", cli.in_dir, "epochs directory")->required();
    rhor->add_option("--subjects", cli.subjects_file, "subjects.csv")->required();
    auto* all_cmd = app.add_subcommand("all", "synth -> preprocess -> features -> experiments");
    all_cmd->add_option("--n", cli.n_subjects, "number of subjects");
    all_cmd->add_flag("--skip-synth", cli.skip_synth, "reuse an existing cohort under --out");

    for (auto* sub : {synth, preprocess, features, train_cmd, evaluate_cmd, sweep_cmd,
                      ablation_cmd, rsub, rhor, all_cmd})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        // every verb except evaluate/features writes under --out; require it
        if (cli.out.empty() && !app.got_subcommand("evaluate"))
            throw ConfigError("--out is required");
        return run_verbs(app, cli);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
