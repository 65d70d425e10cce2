#include "gaitnirs/harness.hpp"
#include "gaitnirs/errors.hpp"
#include "gaitnirs/parallel.hpp"
#include "gaitnirs/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

namespace gaitnirs {

using ordered_json = nlohmann::ordered_json;

// --- experiment config ---

void ExperimentConfig::validate() const {
    if (n_subjects == 0) throw ConfigError("experiment: n_subjects must be >= 1");
    if (!(horizon_s > 0)) throw ConfigError("experiment: horizon must be positive");
    if (!(test_fraction > 0 && test_fraction < 1))
        throw ConfigError("experiment: test_fraction must be inside (0,1)");
    if (timing_reps < 1) throw ConfigError("experiment: timing_reps must be >= 1");
    if (seeds.empty()) throw ConfigError("experiment: at least one seed is required");
    effect.validate();
    pipeline.validate();
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& cfg) {
    cfg.check_keys("experiment", {"n_subjects", "synth_seed", "horizon", "test_fraction",
                                  "split_mode", "timing_reps", "seeds"});
    ExperimentConfig e;
    e.n_subjects = static_cast<size_t>(cfg.get_int("experiment", "n_subjects",
                                                   static_cast<long long>(e.n_subjects)));
    e.synth_seed = static_cast<uint64_t>(cfg.get_int("experiment", "synth_seed",
                                                     static_cast<long long>(e.synth_seed)));
    e.horizon_s = cfg.get_double("experiment", "horizon", e.horizon_s);
    e.test_fraction = cfg.get_double("experiment", "test_fraction", e.test_fraction);
    std::string mode = cfg.get("experiment", "split_mode", "row");
    if (mode == "row") e.subject_mode = false;
    else if (mode == "subject") e.subject_mode = true;
    else throw ConfigError("experiment: split_mode must be 'row' or 'subject', got '" + mode + "'");
    e.timing_reps = static_cast<int>(cfg.get_int("experiment", "timing_reps", e.timing_reps));
    if (cfg.has("experiment", "seeds")) {
        e.seeds.clear();
        for (const auto& part : split_csv(cfg.get("experiment", "seeds", "")))
            e.seeds.push_back(static_cast<uint64_t>(parse_int(part, "experiment.seeds")));
    }
    e.effect = EffectConfig::from_config(cfg);
    e.pipeline = PipelineConfig::from_config(cfg);
    e.validate();
    return e;
}

void ExperimentConfig::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("experiment.n_subjects", fmt_int(static_cast<long long>(n_subjects)));
    kv.emplace_back("experiment.synth_seed", fmt_int(static_cast<long long>(synth_seed)));
    kv.emplace_back("experiment.horizon", fmt_double(horizon_s));
    kv.emplace_back("experiment.test_fraction", fmt_double(test_fraction));
    kv.emplace_back("experiment.split_mode", subject_mode ? "subject" : "row");
    kv.emplace_back("experiment.timing_reps", fmt_int(timing_reps));
    std::string s;
    for (size_t i = 0; i < seeds.size(); ++i) {
        if (i) s += ',';
        s += fmt_int(static_cast<long long>(seeds[i]));
    }
    kv.emplace_back("experiment.seeds", s);
    effect.to_kv(kv);
    pipeline.to_kv(kv);
}

std::string ExperimentConfig::config_hash() const {
    std::vector<std::pair<std::string, std::string>> kv;
    to_kv(kv);
    std::sort(kv.begin(), kv.end());
    std::string dump;
    for (const auto& [k, v] : kv) {
        dump += k;
        dump += '=';
        dump += v;
        dump += '\n';
    }
    uint64_t h = fnv1a64(dump);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// --- grids ---

std::vector<AlgorithmSpec> sweep_grid() {
    std::vector<AlgorithmSpec> grid;
    for (const char* token : {"lr", "dt", "rf:5", "rf:10", "rf:25", "svm", "knn:5", "knn:1",
                              "mlp:10", "mlp:10,10", "mlp:50"})
        grid.push_back(AlgorithmSpec::parse(token));
    return grid;
}

std::vector<AblationRow> ablation_grid() {
    auto stat_mask = [](bool hb, bool hbo2, bool max_min_mean, bool skew_kurt) {
        std::vector<int> idx;
        // block starts: Hb-L 2, Hb-R 7, HbO2-L 12, HbO2-R 17; stats ordered
        // max,min,mean,skew,kurt within each block
        for (int block : {0, 1, 2, 3}) {
            bool is_hbo2 = block >= 2;
            if ((is_hbo2 && !hbo2) || (!is_hbo2 && !hb)) continue;
            int base = 2 + block * 5;
            if (max_min_mean) {
                idx.push_back(base);
                idx.push_back(base + 1);
                idx.push_back(base + 2);
            }
            if (skew_kurt) {
                idx.push_back(base + 3);
                idx.push_back(base + 4);
            }
        }
        return mask_from_indices(idx);
    };
    return {
        {"all_stats", stat_mask(true, true, true, true)},
        {"kurt_skew", stat_mask(true, true, false, true)},
        {"max_min_mean", stat_mask(true, true, true, false)},
        {"hbo2_all", stat_mask(false, true, true, true)},
        {"hb_all", stat_mask(true, false, true, true)},
        {"hbo2_max_min_mean", stat_mask(false, true, true, false)},
        {"hb_max_min_mean", stat_mask(true, false, true, false)},
    };
}

// --- shared experiment plumbing ---

double dataset_accuracy(const TrainedModel& model, const Dataset& ds) {
    if (ds.size() == 0) throw DataError("empty evaluation set");
    size_t correct = 0;
    for (size_t i = 0; i < ds.size(); ++i)
        if (predict(model, ds.x[i]) == ds.y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

double mean_of_cells(const std::vector<SeedCell>& cells) {
    double s = 0;
    for (const auto& c : cells) s += c.accuracy;
    return s / static_cast<double>(cells.size());
}

double sd_of_cells(const std::vector<SeedCell>& cells, double mean) {
    if (cells.size() < 2) return 0.0;
    double s = 0;
    for (const auto& c : cells) s += (c.accuracy - mean) * (c.accuracy - mean);
    return std::sqrt(s / static_cast<double>(cells.size() - 1));
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t m = v.size();
    return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Accuracy per seed; timing (train + 1000-query test, median of reps) on the
// first seed only, so timing noise never touches the aggregated accuracies.
TableRow run_table_row(const ExperimentConfig& cfg, const AlgorithmSpec& spec,
                       const std::string& name, const Dataset& ds, bool with_timing) {
    TableRow row;
    row.name = name;
    for (size_t si = 0; si < cfg.seeds.size(); ++si) {
        uint64_t seed = cfg.seeds[si];
        auto [train_ds, test_ds] = split_dataset(ds, cfg.test_fraction, seed, cfg.subject_mode);
        TrainedModel model;
        try {
            model = train(spec, train_ds, seed);
        } catch (const TrainError& e) {
            throw TrainError(name + " (seed " + std::to_string(seed) + "): " + e.what());
        }
        if (si == 0 && with_timing) {
            std::vector<double> train_times;
            double t0 = now_ms();
            TrainedModel again = train(spec, train_ds, seed);
            train_times.push_back(now_ms() - t0);
            for (int rep = 1; rep < cfg.timing_reps; ++rep) {
                t0 = now_ms();
                again = train(spec, train_ds, seed);
                train_times.push_back(now_ms() - t0);
            }
            row.train_ms = median_of(train_times);
            model.train_time_ms = row.train_ms;
            EvalReport er = evaluate(model, test_ds, cfg.timing_reps);
            row.test_ms = er.test_time_ms_per_1000;
            row.per_seed.push_back({seed, er.accuracy});
        } else {
            row.per_seed.push_back({seed, dataset_accuracy(model, test_ds)});
        }
    }
    row.accuracy = mean_of_cells(row.per_seed);
    row.sd = sd_of_cells(row.per_seed, row.accuracy);
    return row;
}

} // namespace

std::vector<TableRow> run_sweep(const ExperimentConfig& cfg, const std::vector<FeatureRow>& rows) {
    cfg.validate();
    Dataset ds = make_dataset(rows, full_mask());
    std::vector<TableRow> table;
    for (const auto& spec : sweep_grid())
        table.push_back(run_table_row(cfg, spec, spec.id(), ds, true));
    return table;
}

std::vector<TableRow> run_ablation(const ExperimentConfig& cfg,
                                   const std::vector<FeatureRow>& rows) {
    cfg.validate();
    AlgorithmSpec lr = AlgorithmSpec::parse("lr");
    std::vector<TableRow> table;
    for (const auto& ab : ablation_grid()) {
        Dataset ds = make_dataset(rows, ab.mask);
        table.push_back(run_table_row(cfg, lr, ab.name, ds, false));
    }
    return table;
}

std::vector<SeriesPoint> run_subject_reduction(const ExperimentConfig& cfg,
                                               const std::vector<FeatureRow>& rows) {
    cfg.validate();
    AlgorithmSpec lr = AlgorithmSpec::parse("lr");
    std::vector<std::string> all_ids;
    for (const auto& r : rows)
        if (std::find(all_ids.begin(), all_ids.end(), r.subject_id) == all_ids.end())
            all_ids.push_back(r.subject_id);

    std::vector<SeriesPoint> series;
    for (double frac : cfg.subject_fractions) {
        SeriesPoint pt;
        pt.x = frac;
        size_t keep = static_cast<size_t>(
            std::llround(static_cast<double>(all_ids.size()) * frac));
        if (keep < 10)
            throw DataError("TooSmall: fraction " + fmt_double(frac) + " keeps only " +
                            std::to_string(keep) + " subjects (need >= 10)");
        for (uint64_t seed : cfg.seeds) {
            // dedicated child stream so the subject shuffle is independent of
            // the split shuffle that reuses the same seed
            auto ids = all_ids;
            RandomStream subsample = RandomStream(seed).child(9001);
            subsample.shuffle(ids);
            ids.resize(keep);
            std::sort(ids.begin(), ids.end());
            std::vector<FeatureRow> sub;
            for (const auto& r : rows) // original row order is preserved
                if (std::binary_search(ids.begin(), ids.end(), r.subject_id)) sub.push_back(r);
            Dataset ds = make_dataset(sub, full_mask());
            auto [train_ds, test_ds] =
                split_dataset(ds, cfg.test_fraction, seed, cfg.subject_mode);
            TrainedModel model = train(lr, train_ds, seed);
            pt.per_seed.push_back({seed, dataset_accuracy(model, test_ds)});
        }
        pt.mean = mean_of_cells(pt.per_seed);
        pt.sd = sd_of_cells(pt.per_seed, pt.mean);
        series.push_back(std::move(pt));
    }
    return series;
}

std::vector<SeriesPoint> run_timelength_reduction(const ExperimentConfig& cfg,
                                                  const std::vector<SubjectMeta>& subjects,
                                                  const std::vector<SubjectEpochs>& epochs) {
    cfg.validate();
    AlgorithmSpec lr = AlgorithmSpec::parse("lr");
    std::vector<SeriesPoint> series;
    for (double horizon : cfg.horizons) {
        FeatureExtraction fx = extract_features(subjects, epochs, horizon);
        Dataset ds = make_dataset(fx.rows, full_mask());
        SeriesPoint pt;
        pt.x = horizon;
        for (uint64_t seed : cfg.seeds) {
            auto [train_ds, test_ds] =
                split_dataset(ds, cfg.test_fraction, seed, cfg.subject_mode);
            TrainedModel model = train(lr, train_ds, seed);
            pt.per_seed.push_back({seed, dataset_accuracy(model, test_ds)});
        }
        pt.mean = mean_of_cells(pt.per_seed);
        pt.sd = sd_of_cells(pt.per_seed, pt.mean);
        series.push_back(std::move(pt));
    }
    return series;
}

// --- report emission ---

namespace {

ordered_json cells_json(const std::vector<SeedCell>& cells) {
    ordered_json arr = ordered_json::array();
    for (const auto& c : cells) arr.push_back({{"seed", c.seed}, {"accuracy", c.accuracy}});
    return arr;
}

std::string table_csv(const std::vector<TableRow>& rows, bool timing) {
    std::string out = timing ? "algorithm,accuracy,train_ms,test_ms\n" : "features,accuracy,sd\n";
    for (const auto& r : rows) {
        out += r.name;
        out += ',';
        out += fmt_double(r.accuracy);
        if (timing) {
            out += ',';
            out += fmt_double(r.train_ms);
            out += ',';
            out += fmt_double(r.test_ms);
        } else {
            out += ',';
            out += fmt_double(r.sd);
        }
        out += '\n';
    }
    return out;
}

std::string series_csv(const std::vector<SeriesPoint>& pts) {
    std::string out = "x,mean,sd\n";
    for (const auto& p : pts) {
        out += fmt_double(p.x);
        out += ',';
        out += fmt_double(p.mean);
        out += ',';
        out += fmt_double(p.sd);
        out += '\n';
    }
    return out;
}

} // namespace

void emit_report(const ReportDoc& doc, const std::filesystem::path& out_dir) {
    ordered_json report;
    report["artifact_version"] = 1;
    report["provenance"] = {
        {"config_hash", doc.config_hash},
        {"seeds", doc.seeds},
        {"timing_note",
         "train_ms/test_ms are wall-clock, environment-dependent, and excluded from the "
         "reproducibility guarantee; accuracy cells are a pure function of (config, seeds)"},
    };
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : doc.config_kv) cfg[k] = v;
    report["config"] = cfg;

    ordered_json sweep = ordered_json::array();
    for (const auto& r : doc.sweep)
        sweep.push_back({{"algorithm", r.name},
                         {"accuracy", r.accuracy},
                         {"sd", r.sd},
                         {"train_ms", r.train_ms},
                         {"test_ms", r.test_ms},
                         {"per_seed", cells_json(r.per_seed)}});
    ordered_json ablation = ordered_json::array();
    for (const auto& r : doc.ablation)
        ablation.push_back({{"features", r.name},
                            {"accuracy", r.accuracy},
                            {"sd", r.sd},
                            {"per_seed", cells_json(r.per_seed)}});
    report["tables"] = {{"sweep", sweep}, {"ablation", ablation}};

    auto series_json = [](const std::vector<SeriesPoint>& pts) {
        ordered_json arr = ordered_json::array();
        for (const auto& p : pts)
            arr.push_back({{"x", p.x},
                           {"mean", p.mean},
                           {"sd", p.sd},
                           {"per_seed", cells_json(p.per_seed)}});
        return arr;
    };
    report["series"] = {{"subject_reduction", series_json(doc.subject_reduction)},
                        {"horizon_reduction", series_json(doc.horizon_reduction)}};

    write_text_file(out_dir / "report.json", report.dump(2) + "\n");
    write_text_file(out_dir / "tables" / "sweep.csv", table_csv(doc.sweep, true));
    std::string acc = "algorithm,accuracy\n";
    for (const auto& r : doc.sweep) acc += r.name + "," + fmt_double(r.accuracy) + "\n";
    write_text_file(out_dir / "tables" / "sweep_accuracy.csv", acc);
    write_text_file(out_dir / "tables" / "ablation.csv", table_csv(doc.ablation, false));
    write_text_file(out_dir / "series" / "subject_reduction.csv",
                    series_csv(doc.subject_reduction));
    write_text_file(out_dir / "series" / "horizon_reduction.csv",
                    series_csv(doc.horizon_reduction));
}

// --- batch preprocessing + run_all ---

PreprocessResult preprocess_cohort(const Cohort& cohort, const PipelineConfig& pipeline) {
    struct SubjectOutcome {
        bool ok = false;
        SubjectEpochs epochs;
        Exclusion excl;
    };
    std::map<std::string, const SubjectMeta*> meta_by_id;
    for (const auto& s : cohort.subjects) meta_by_id[s.subject_id] = &s;
    std::vector<SubjectOutcome> outcomes(cohort.recordings.size());
    parallel_for(cohort.recordings.size(), [&](size_t i) {
        const RawRecording& rec = cohort.recordings[i];
        SubjectOutcome& o = outcomes[i];
        try {
            auto it = meta_by_id.find(rec.subject_id);
            if (it == meta_by_id.end()) throw DataError("recording has no subjects.csv entry");
            PipelineResult res = run_pipeline(rec, *it->second, pipeline);
            o.epochs.subject_id = rec.subject_id;
            o.epochs.epochs = {res.stw, res.dtw};
            o.ok = true;
        } catch (const StageError& e) {
            o.excl = {rec.subject_id, e.stage, e.message};
        } catch (const std::exception& e) {
            o.excl = {rec.subject_id, "preprocess", e.what()};
        }
    });
    PreprocessResult out;
    for (const auto& o : outcomes) {
        if (o.ok) {
            out.epochs.push_back(o.epochs);
            out.survivors.push_back(*meta_by_id.at(o.epochs.subject_id));
        } else {
            out.exclusions.push_back(o.excl);
        }
    }
    return out;
}

ReportDoc run_all(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                  bool skip_synth, bool quiet) {
    cfg.validate();
    auto note = [&](const std::string& msg) {
        if (!quiet) std::cerr << "[gaitnirs] " << msg << "\n";
    };

    Cohort cohort;
    std::filesystem::path cohort_dir = out_dir / "cohort";
    if (!skip_synth) {
        note("generating synthetic cohort (n=" + std::to_string(cfg.n_subjects) + ", seed " +
             std::to_string(cfg.synth_seed) + ")");
        auto synth = generate_cohort(cfg.n_subjects, cfg.synth_seed, cfg.effect,
                                     cfg.pipeline.mbll);
        write_synth_cohort(cohort_dir, synth);
        for (auto& s : synth) {
            cohort.subjects.push_back(s.meta);
            cohort.recordings.push_back(std::move(s.rec));
        }
    } else {
        if (!std::filesystem::exists(cohort_dir / "subjects.csv"))
            throw StageError("preprocess",
                             "cohort directory missing or incomplete: " + cohort_dir.string());
        note("loading cohort from " + cohort_dir.string());
        cohort = load_cohort(cohort_dir);
    }

    ValidationReport vr = validate_cohort(cohort.subjects, cohort.recordings);
    for (const auto& issue : vr.warnings()) note("warning: " + issue.subject_id + ": " + issue.reason);
    if (!vr.passed) {
        const auto fails = vr.failures();
        throw StageError("preprocess", fails[0].subject_id + ": " + fails[0].reason);
    }

    note("preprocessing " + std::to_string(cohort.recordings.size()) + " recordings");
    PreprocessResult pre = preprocess_cohort(cohort, cfg.pipeline);
    std::filesystem::path epochs_dir = out_dir / "epochs";
    std::filesystem::create_directories(epochs_dir);
    for (const auto& se : pre.epochs)
        write_text_file(epochs_dir / (se.subject_id + "_epochs.csv"), epochs_to_csv(se.epochs));

    note("extracting features at horizon " + fmt_double(cfg.horizon_s) + " s");
    FeatureExtraction fx;
    try {
        fx = extract_features(pre.survivors, pre.epochs, cfg.horizon_s);
    } catch (const DataError& e) {
        throw StageError("features", e.what());
    }
    std::vector<Exclusion> exclusions = pre.exclusions;
    exclusions.insert(exclusions.end(), fx.exclusions.begin(), fx.exclusions.end());
    write_text_file(out_dir / "exclusions.csv", exclusions_to_csv(exclusions));
    write_features_csv(out_dir / "features.csv", fx.rows);

    ReportDoc doc;
    doc.config_hash = cfg.config_hash();
    doc.seeds = cfg.seeds;
    cfg.to_kv(doc.config_kv);
    note("running algorithm sweep (11 configurations x " + std::to_string(cfg.seeds.size()) +
         " seeds)");
    doc.sweep = run_sweep(cfg, fx.rows);
    note("running feature ablation");
    doc.ablation = run_ablation(cfg, fx.rows);
    note("running subject-count reduction");
    doc.subject_reduction = run_subject_reduction(cfg, fx.rows);
    note("running observation-window reduction");
    doc.horizon_reduction = run_timelength_reduction(cfg, pre.survivors, pre.epochs);
    emit_report(doc, out_dir);
    note("report written to " + (out_dir / "report.json").string());
    return doc;
}

} // namespace gaitnirs
