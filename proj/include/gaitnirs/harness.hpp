#pragma once
#include "gaitnirs/classify.hpp"
#include "gaitnirs/preprocess.hpp"
#include "gaitnirs/synthgen.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gaitnirs {

struct ExperimentConfig {
    size_t n_subjects = 451;
    uint64_t synth_seed = 7;
    double horizon_s = 60.0;
    double test_fraction = 0.2;
    bool subject_mode = false; // row splitting by default
    int timing_reps = 5;
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<double> subject_fractions{0.25, 0.5, 0.75, 1.0};
    std::vector<double> horizons{30, 45, 60, 90};
    EffectConfig effect;
    PipelineConfig pipeline;

    void validate() const;
    static ExperimentConfig from_config(const ConfigFile& cfg); // [experiment] + [synth] + pipeline sections
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
    std::string config_hash() const; // FNV-1a over the sorted key=value dump
};

// The fixed 11-configuration algorithm grid and the 7 feature-ablation masks.
std::vector<AlgorithmSpec> sweep_grid();

struct AblationRow {
    std::string name;
    FeatureMask mask;
};
std::vector<AblationRow> ablation_grid();

struct SeedCell {
    uint64_t seed = 0;
    double accuracy = 0;
};

struct TableRow {
    std::string name;
    double accuracy = 0; // mean over seeds
    double sd = 0;       // sample standard deviation over seeds
    double train_ms = 0; // first seed only, median of timing_reps
    double test_ms = 0;  // per 1000 queries, first seed only
    std::vector<SeedCell> per_seed;
};

struct SeriesPoint {
    double x = 0;
    double mean = 0;
    double sd = 0;
    std::vector<SeedCell> per_seed;
};

struct ReportDoc {
    std::string config_hash;
    std::vector<uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> config_kv;
    std::vector<TableRow> sweep;
    std::vector<TableRow> ablation;
    std::vector<SeriesPoint> subject_reduction;
    std::vector<SeriesPoint> horizon_reduction;
};

double dataset_accuracy(const TrainedModel& model, const Dataset& ds);

std::vector<TableRow> run_sweep(const ExperimentConfig& cfg, const std::vector<FeatureRow>& rows);
std::vector<TableRow> run_ablation(const ExperimentConfig& cfg,
                                   const std::vector<FeatureRow>& rows);
std::vector<SeriesPoint> run_subject_reduction(const ExperimentConfig& cfg,
                                               const std::vector<FeatureRow>& rows);
std::vector<SeriesPoint> run_timelength_reduction(const ExperimentConfig& cfg,
                                                  const std::vector<SubjectMeta>& subjects,
                                                  const std::vector<SubjectEpochs>& epochs);

// report.json + tables/*.csv + series/*.csv under out_dir. Timing columns are
// environment-dependent; every other emitted number is a pure function of
// (config, seeds).
void emit_report(const ReportDoc& doc, const std::filesystem::path& out_dir);

struct PreprocessResult {
    std::vector<SubjectMeta> survivors;
    std::vector<SubjectEpochs> epochs;
    std::vector<Exclusion> exclusions;
};

// Runs the preprocessing pipeline per subject, turning per-subject failures
// into exclusion records instead of aborting the batch.
PreprocessResult preprocess_cohort(const Cohort& cohort, const PipelineConfig& pipeline);

// synth -> preprocess -> features -> sweep + ablation + both reductions -> emit.
ReportDoc run_all(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                  bool skip_synth = false, bool quiet = false);

} // namespace gaitnirs
