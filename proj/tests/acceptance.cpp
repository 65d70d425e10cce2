// Acceptance gate: every release criterion below must print PASS.
// Exit code is the number of failed criteria.
#include "gaitnirs/classify.hpp"
#include "gaitnirs/errors.hpp"
#include "gaitnirs/features.hpp"
#include "gaitnirs/harness.hpp"
#include "gaitnirs/preprocess.hpp"
#include "gaitnirs/random.hpp"
#include "gaitnirs/synthgen.hpp"
#include "gaitnirs/textio.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

using namespace gaitnirs;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s: %s — %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

// --- criterion: the optical forward model and MBLL invert each other ---

void check_mbll_roundtrip() {
    double t0 = now_ms();
    MbllParams params;
    RandomStream rs(404);
    const size_t nref = 20, n = 1000;
    Series hbo2(nref + n, 0.0), hb(nref + n, 0.0);
    for (size_t t = nref; t < hbo2.size(); ++t) {
        hbo2[t] = rs.uniform(-15.0, 15.0);
        hb[t] = rs.uniform(-15.0, 15.0);
    }
    auto [i730, i850] = forward_mbll(hbo2, hb, 73.2, params);
    auto [r_hbo2, r_hb] = mbll_convert(i730, i850, 73.2, params);
    double worst = 0;
    for (size_t t = 0; t < hbo2.size(); ++t) {
        worst = std::max(worst, std::abs(r_hbo2[t] - hbo2[t]) / 15.0);
        worst = std::max(worst, std::abs(r_hb[t] - hb[t]) / 15.0);
    }
    double elapsed = now_ms() - t0;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "1000 random concentration pairs, max relative error %.3g in %.1f ms", worst,
                  elapsed);
    report("mbll_roundtrip", worst < 1e-9 && elapsed < 1000.0, buf);
}

// --- criterion: wavelet perfect reconstruction and spike suppression ---

void check_wavelet() {
    bool ok = true;
    double worst = 0;
    WaveletConfig passthrough;
    passthrough.alpha = 0.0;
    for (size_t n : {64u, 120u, 200u}) {
        RandomStream rs(500 + n);
        Series x(n);
        for (auto& v : x) v = rs.normal(0.0, 1.0);
        Series y = wavelet_denoise(x, passthrough);
        double num = 0, den = 0;
        for (size_t i = 0; i < n; ++i) {
            num += (y[i] - x[i]) * (y[i] - x[i]);
            den += x[i] * x[i];
        }
        double rel = std::sqrt(num / den);
        worst = std::max(worst, rel);
        if (rel >= 1e-9) ok = false;
    }

    // 0.05 Hz carrier plus one spike of 10x the signal SD; distortion is
    // judged on the carrier outside the artifact's local support (+-15 s),
    // the spike neighbourhood itself is covered by the peak-reduction clause
    const size_t n = 400, spike_at = 173;
    Series carrier(n), noisy(n);
    for (size_t t = 0; t < n; ++t) {
        carrier[t] = std::cos(2.0 * M_PI * 0.05 * (t / kSamplingRateHz));
        noisy[t] = carrier[t];
    }
    const double spike = 10.0 * std::sqrt(0.5);
    noisy[spike_at] += spike;
    WaveletConfig cfg;
    Series clean = wavelet_denoise(noisy, cfg);
    double peak_reduction = 1.0 - std::abs(clean[spike_at] - carrier[spike_at]) / spike;
    double rms_err = 0, rms_ref = 0;
    for (size_t t = 0; t < n; ++t) {
        if (t + 30 >= spike_at && t <= spike_at + 30) continue;
        rms_err += (clean[t] - carrier[t]) * (clean[t] - carrier[t]);
        rms_ref += carrier[t] * carrier[t];
    }
    double distortion = std::sqrt(rms_err / rms_ref);
    if (peak_reduction < 0.8 || distortion > 0.05) ok = false;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "reconstruction error %.3g (lengths 64/120/200); spike peak reduced %.0f%%, "
                  "carrier distortion %.1f%%",
                  worst, 100.0 * peak_reduction, 100.0 * distortion);
    report("wavelet_reconstruction", ok, buf);
}

// --- criterion: FIR low-pass meets its band specification ---

void check_fir() {
    FilterSpec spec;
    Series h = design_fir(spec, kSamplingRateHz);
    auto mag = [&](double f) {
        std::complex<double> acc(0, 0);
        for (size_t k = 0; k < h.size(); ++k)
            acc += h[k] * std::exp(std::complex<double>(0, -2.0 * M_PI * f / kSamplingRateHz *
                                                               static_cast<double>(k)));
        return std::abs(acc);
    };
    double pass_db = 20.0 * std::log10(mag(0.02));
    double stop_db = 20.0 * std::log10(mag(0.25));
    double stop_hi_db = 20.0 * std::log10(mag(0.5));
    bool symmetric = true;
    for (size_t k = 0; k < h.size(); ++k)
        if (std::abs(h[k] - h[h.size() - 1 - k]) > 1e-12) symmetric = false;
    double dc = 0;
    for (double v : h) dc += v;

    bool ok = symmetric && std::abs(dc - 1.0) < 1e-9 && std::abs(pass_db) < 0.5 &&
              stop_db < -40.0 && stop_hi_db < -40.0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "101 taps, DC %.12f, 0.02 Hz %+.3f dB, 0.25 Hz %.1f dB, 0.5 Hz %.1f dB", dc,
                  pass_db, stop_db, stop_hi_db);
    report("fir_specification", ok, buf);
}

// --- criterion: binary encoding is complementary and rank-invariant ---

void check_encoding() {
    RandomStream rs(600);
    bool ok = true;
    for (int trial = 0; trial < 500 && ok; ++trial) {
        CondFeatures stw, dtw;
        stw.subject_id = dtw.subject_id = "S1";
        stw.task = Task::STW;
        dtw.task = Task::DTW;
        for (int i = 0; i < kNumCondFeatures; ++i) {
            stw.values[i] = rs.uniform(-5.0, 5.0);
            dtw.values[i] = rs.uniform(-5.0, 5.0);
        }
        auto [es, ed] = encode_pair(stw, dtw);
        for (int i = 0; i < kNumCondFeatures; ++i)
            if (es.bits[i] + ed.bits[i] != 1) ok = false;

        CondFeatures stw2 = stw, dtw2 = dtw;
        for (int i = 0; i < kNumCondFeatures; ++i) {
            auto warp = [&](double v) {
                if (i % 3 == 0) return std::exp(v);
                if (i % 3 == 1) return 3.0 * v;
                return v + 7.0;
            };
            stw2.values[i] = warp(stw.values[i]);
            dtw2.values[i] = warp(dtw.values[i]);
        }
        auto [es2, ed2] = encode_pair(stw2, dtw2);
        if (es2.bits != es.bits || ed2.bits != ed.bits) ok = false;
    }
    report("encoding_invariants", ok,
           "500 random pairs: bits complementary, invariant under exp/scale/shift");
}

// --- criterion: classifier implementations match independent oracles ---

void check_classifier_oracles() {
    // kNN vs exhaustive scan
    bool knn_ok = true;
    {
        RandomStream rs(700);
        Dataset train_set;
        for (int i = 0; i < 80; ++i) {
            std::vector<double> x(6);
            for (auto& v : x) v = rs.uniform(-2.0, 2.0);
            train_set.x.push_back(x);
            train_set.y.push_back(rs.bernoulli(0.5) ? 1 : 0);
            train_set.subject_ids.push_back("S" + std::to_string(i));
        }
        for (int k : {1, 5}) {
            AlgorithmSpec spec = AlgorithmSpec::parse("knn:" + std::to_string(k));
            TrainedModel model = train(spec, train_set, 1);
            for (int q = 0; q < 100; ++q) {
                std::vector<double> query(6);
                for (auto& v : query) v = rs.uniform(-2.0, 2.0);
                // reference: full sort on (squared distance, index)
                std::vector<std::pair<double, size_t>> d;
                for (size_t i = 0; i < train_set.size(); ++i) {
                    double acc = 0;
                    for (size_t j = 0; j < query.size(); ++j) {
                        double diff = train_set.x[i][j] - query[j];
                        acc += diff * diff;
                    }
                    d.push_back({acc, i});
                }
                std::sort(d.begin(), d.end());
                int votes = 0;
                for (int i = 0; i < k; ++i) votes += train_set.y[d[i].second];
                int expected = votes * 2 > k ? 1 : 0;
                if (predict(model, query) != expected) knn_ok = false;
            }
        }
    }

    // a single non-random tree forest must equal the plain decision tree
    bool rf_ok = true;
    for (uint64_t s = 0; s < 20; ++s) {
        RandomStream rs(800 + s);
        Dataset ds;
        for (int i = 0; i < 60; ++i) {
            std::vector<double> x(5);
            int acc = 0;
            for (auto& v : x) {
                v = rs.bernoulli(0.5) ? 1.0 : 0.0;
                acc += static_cast<int>(v);
            }
            ds.x.push_back(x);
            ds.y.push_back(acc >= 3 ? 1 : 0);
            ds.subject_ids.push_back("S" + std::to_string(i));
        }
        AlgorithmSpec rf = AlgorithmSpec::parse("rf:1");
        rf.rf_bootstrap = false;
        rf.rf_feature_subsample = false;
        TrainedModel forest = train(rf, ds, 3);
        TrainedModel tree = train(AlgorithmSpec::parse("dt"), ds, 3);
        for (int q = 0; q < 64; ++q) {
            std::vector<double> probe(5);
            for (int j = 0; j < 5; ++j) probe[j] = (q >> j) & 1 ? 1.0 : 0.0;
            if (predict(forest, probe) != predict(tree, probe)) rf_ok = false;
        }
    }

    // analytic gradients vs central differences
    RandomStream rs(900);
    Dataset sample;
    for (int i = 0; i < 16; ++i) {
        std::vector<double> x(22);
        for (auto& v : x) v = rs.uniform(0.0, 1.0);
        sample.x.push_back(x);
        sample.y.push_back(i % 2);
        sample.subject_ids.push_back("S" + std::to_string(i));
    }
    double lr_err = gradient_check_lr(sample, 1e-4);
    double mlp_err = gradient_check_mlp(sample, {10}, 5);
    bool grad_ok = lr_err < 1e-5 && mlp_err < 1e-4;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "kNN==scan %s; RF(1,plain)==DT %s; gradient error LR %.2e, MLP %.2e",
                  knn_ok ? "yes" : "NO", rf_ok ? "yes" : "NO", lr_err, mlp_err);
    report("classifier_oracles", knn_ok && rf_ok && grad_ok, buf);
}

// --- criterion: the full experiment is byte-deterministic ---

std::string slurp(const fs::path& p) { return read_text_file(p); }

void check_determinism() {
    ExperimentConfig cfg;
    cfg.n_subjects = 30;
    cfg.synth_seed = 11;
    cfg.seeds = {1, 2};
    cfg.timing_reps = 1;
    cfg.subject_fractions = {0.5, 1.0};
    cfg.horizons = {30.0, 60.0};

    struct Run {
        const char* threads;
        fs::path dir;
    };
    std::vector<Run> runs = {{"1", {}}, {"4", {}}, {"1", {}}, {"4", {}}};
    fs::path base = fs::temp_directory_path() / "gaitnirs_acceptance_det";
    fs::remove_all(base);
    for (size_t i = 0; i < runs.size(); ++i) {
        runs[i].dir = base / ("run" + std::to_string(i));
        setenv("GAITNIRS_THREADS", runs[i].threads, 1);
        run_all(cfg, runs[i].dir, false, true);
    }
    unsetenv("GAITNIRS_THREADS");

    const char* artifacts[] = {
        "features.csv",          "exclusions.csv",
        "tables/sweep_accuracy.csv", "tables/ablation.csv",
        "series/subject_reduction.csv", "series/horizon_reduction.csv",
    };
    bool ok = true;
    std::string first_mismatch;
    for (const char* rel : artifacts) {
        std::string ref = slurp(runs[0].dir / rel);
        for (size_t i = 1; i < runs.size(); ++i) {
            if (slurp(runs[i].dir / rel) != ref) {
                ok = false;
                if (first_mismatch.empty())
                    first_mismatch = std::string(rel) + " differs in run " + std::to_string(i);
            }
        }
    }
    fs::remove_all(base);
    report("byte_determinism", ok,
           ok ? "accuracy artifacts identical across 2 repeats x worker counts {1,4}"
              : first_mismatch);
}

// --- criteria: headline accuracies and timing on the default experiment ---

void check_end_to_end() {
    ExperimentConfig cfg; // defaults: 451 subjects, synth seed 7, seeds 1..5
    fs::path out = fs::temp_directory_path() / "gaitnirs_acceptance_full";
    fs::remove_all(out);
    ReportDoc doc = run_all(cfg, out, false, true);
    fs::remove_all(out);

    // headline linear-model accuracy
    double lr_acc = -1;
    double min_acc = 2.0;
    std::string min_name;
    for (const auto& row : doc.sweep) {
        if (row.name == "LR") lr_acc = row.accuracy;
        if (row.accuracy < min_acc) {
            min_acc = row.accuracy;
            min_name = row.name;
        }
    }
    char buf[240];
    std::snprintf(buf, sizeof buf, "LR accuracy %.4f (needs >= 0.95)", lr_acc);
    report("headline_accuracy", lr_acc >= 0.95, buf);

    std::snprintf(buf, sizeof buf, "weakest algorithm %s at %.4f (needs >= 0.85)",
                  min_name.c_str(), min_acc);
    report("sweep_floor", doc.sweep.size() == 11 && min_acc >= 0.85, buf);

    // skew/kurtosis-only must be the strict ablation minimum
    double kurt_skew = -1, second_lowest = 2.0;
    for (const auto& row : doc.ablation) {
        if (row.name == "kurt_skew") kurt_skew = row.accuracy;
        else second_lowest = std::min(second_lowest, row.accuracy);
    }
    std::snprintf(buf, sizeof buf, "kurt_skew %.4f vs next lowest %.4f", kurt_skew,
                  second_lowest);
    report("ablation_minimum", kurt_skew >= 0 && kurt_skew < second_lowest, buf);

    // subject reduction: accuracy must not decay by more than one sd per step
    bool monotone = doc.subject_reduction.size() == 4;
    for (size_t i = 0; monotone && i + 1 < doc.subject_reduction.size(); ++i) {
        const auto& a = doc.subject_reduction[i];
        const auto& b = doc.subject_reduction[i + 1];
        if (b.mean < a.mean - std::max(a.sd, b.sd)) monotone = false;
    }
    std::string curve;
    for (const auto& pt : doc.subject_reduction) {
        char cell[48];
        std::snprintf(cell, sizeof cell, " %.2f:%.4f(sd %.4f)", pt.x, pt.mean, pt.sd);
        curve += cell;
    }
    report("subject_reduction_trend", monotone, "non-decreasing within 1 sd:" + curve);

    // observation horizon: 30 s must lose accuracy, 90 s must match 60 s
    auto horizon_acc = [&](double x) {
        for (const auto& pt : doc.horizon_reduction)
            if (pt.x == x) return pt.mean;
        return -1.0;
    };
    double h30 = horizon_acc(30.0), h60 = horizon_acc(60.0), h90 = horizon_acc(90.0);
    bool horizon_ok = h30 >= 0 && h60 >= 0 && h90 >= 0 && h30 < h60 &&
                      std::abs(h90 - h60) <= 0.02;
    std::snprintf(buf, sizeof buf, "acc(30)=%.4f < acc(60)=%.4f, |acc(90)-acc(60)|=%.4f",
                  h30, h60, std::abs(h90 - h60));
    report("horizon_tradeoff", horizon_ok, buf);

    // timing table: full grid with positive train and per-1000-query times
    bool timing_ok = doc.sweep.size() == 11;
    for (const auto& row : doc.sweep)
        if (row.train_ms <= 0.0 || row.test_ms <= 0.0) timing_ok = false;
    report("timing_table", timing_ok, "11 algorithms with positive train/test timings");
}

} // namespace

int main() {
    std::printf("acceptance checks\n=================\n");
    check_mbll_roundtrip();
    check_wavelet();
    check_fir();
    check_encoding();
    check_classifier_oracles();
    check_determinism();
    check_end_to_end();
    if (g_failures == 0)
        std::printf("\nall acceptance criteria passed\n");
    else
        std::printf("\n%d acceptance criteria FAILED\n", g_failures);
    return g_failures;
}
