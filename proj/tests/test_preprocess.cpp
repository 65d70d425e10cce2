#include <doctest.h>

#include "gaitnirs/errors.hpp"
#include "gaitnirs/preprocess.hpp"
#include "gaitnirs/random.hpp"
#include "gaitnirs/synthgen.hpp"
#include "gaitnirs/textio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

using namespace gaitnirs;

namespace {

double fir_mag(const Series& h, double freq_hz, double fs_hz) {
    std::complex<double> acc(0, 0);
    double w = 2.0 * M_PI * freq_hz / fs_hz;
    for (size_t k = 0; k < h.size(); ++k)
        acc += h[k] * std::exp(std::complex<double>(0, -w * static_cast<double>(k)));
    return std::abs(acc);
}

double rms(const Series& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s / x.size());
}

RawRecording healthy_recording(size_t n, uint64_t seed) {
    RawRecording rec;
    rec.subject_id = "S0001";
    RandomStream rs(seed);
    for (int c = 0; c < kNumChannels; ++c) {
        rec.channels[c].i730.resize(n);
        rec.channels[c].i850.resize(n);
        for (size_t t = 0; t < n; ++t) {
            rec.channels[c].i730[t] = 1.0 + 0.05 * rs.normal();
            rec.channels[c].i850[t] = 1.0 + 0.05 * rs.normal();
        }
    }
    return rec;
}

// Dense reference for the pentadiagonal smoothing-spline system: build
// (R + alpha Q^T Q) explicitly and solve with Gaussian elimination.
Series dense_spline(const Series& y, double p) {
    size_t m = y.size();
    size_t mm = m - 2;
    double alpha = (1.0 - p) / p;
    std::vector<std::vector<double>> A(mm, std::vector<double>(mm, 0.0));
    for (size_t i = 0; i < mm; ++i) {
        A[i][i] = 2.0 / 3.0 + 6.0 * alpha;
        if (i + 1 < mm) A[i][i + 1] = A[i + 1][i] = 1.0 / 6.0 - 4.0 * alpha;
        if (i + 2 < mm) A[i][i + 2] = A[i + 2][i] = alpha;
    }
    Series rhs(mm);
    for (size_t i = 0; i < mm; ++i) rhs[i] = y[i] - 2 * y[i + 1] + y[i + 2];

    for (size_t col = 0; col < mm; ++col) { // partial-pivot elimination
        size_t piv = col;
        for (size_t r = col + 1; r < mm; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (size_t r = col + 1; r < mm; ++r) {
            double f = A[r][col] / A[col][col];
            for (size_t k = col; k < mm; ++k) A[r][k] -= f * A[col][k];
            rhs[r] -= f * rhs[col];
        }
    }
    Series gamma(mm);
    for (size_t ii = mm; ii-- > 0;) {
        double v = rhs[ii];
        for (size_t k = ii + 1; k < mm; ++k) v -= A[ii][k] * gamma[k];
        gamma[ii] = v / A[ii][ii];
    }
    auto gam = [&](long long i) -> double {
        return (i >= 0 && i < static_cast<long long>(mm)) ? gamma[i] : 0.0;
    };
    Series g(m);
    for (size_t i = 0; i < m; ++i) {
        long long ii = static_cast<long long>(i);
        g[i] = y[i] - alpha * (gam(ii - 2) - 2 * gam(ii - 1) + gam(ii));
    }
    return g;
}

} // namespace

TEST_SUITE("preprocess") {

// --- differential pathlength factor ---

TEST_CASE("dpf matches reference evaluations") {
    MbllParams params;
    CHECK(std::abs(dpf(730.0, 76.16, params) - 7.5305119748087364) < 1e-12);
    CHECK(std::abs(dpf(850.0, 76.16, params) - 6.4532035748087364) < 1e-12);
    CHECK(std::abs(dpf(730.0, 70.0, params) - 7.3764004857858814) < 1e-12);
    CHECK(std::abs(dpf(850.0, 70.0, params) - 6.2990920857858814) < 1e-12);
}

TEST_CASE("dpf grows with age and rejects bad domains") {
    MbllParams params;
    CHECK(dpf(730.0, 80.0, params) > dpf(730.0, 65.0, params));
    CHECK_THROWS_AS(dpf(600.0, 70.0, params), ConfigError);
    CHECK_THROWS_AS(dpf(951.0, 70.0, params), ConfigError);
    CHECK_THROWS_AS(dpf(730.0, 0.0, params), DataError);
    CHECK_NOTHROW(dpf(650.0, 70.0, params));
    CHECK_NOTHROW(dpf(950.0, 70.0, params));
}

// --- modified Beer-Lambert ---

TEST_CASE("mbll inverts the forward optical model") {
    MbllParams params;
    RandomStream rs(21);
    const double age = 71.4;
    const size_t n_ref = 20, n = 500;
    Series hbo2(n_ref + n, 0.0), hb(n_ref + n, 0.0);
    for (size_t t = n_ref; t < hbo2.size(); ++t) {
        hbo2[t] = rs.uniform(-10.0, 10.0);
        hb[t] = rs.uniform(-10.0, 10.0);
    }
    auto [i730, i850] = forward_mbll(hbo2, hb, age, params);
    auto [r_hbo2, r_hb] = mbll_convert(i730, i850, age, params);
    REQUIRE(r_hbo2.size() == hbo2.size());
    for (size_t t = 0; t < hbo2.size(); ++t) {
        CHECK(std::abs(r_hbo2[t] - hbo2[t]) < 1e-9);
        CHECK(std::abs(r_hb[t] - hb[t]) < 1e-9);
    }
}

TEST_CASE("mbll measures changes against the first ten seconds") {
    MbllParams params;
    const double age = 70.0;
    // constant nonzero concentrations during the reference window shift the
    // recovered values by exactly that reference level
    Series hbo2(60, 2.0), hb(60, -1.0);
    for (size_t t = 20; t < 60; ++t) {
        hbo2[t] = 5.0;
        hb[t] = 3.0;
    }
    auto [i730, i850] = forward_mbll(hbo2, hb, age, params);
    auto [r_hbo2, r_hb] = mbll_convert(i730, i850, age, params);
    CHECK(r_hbo2[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r_hb[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r_hbo2[30] == doctest::Approx(3.0).epsilon(1e-9));  // 5 - 2
    CHECK(r_hb[30] == doctest::Approx(4.0).epsilon(1e-9));    // 3 - (-1)
}

TEST_CASE("partial volume correction rescales concentrations") {
    MbllParams base;
    MbllParams pvc = base;
    pvc.partial_volume_correction = true;
    pvc.partial_volume_factor = 50.0;

    Series hbo2(40, 0.0), hb(40, 0.0);
    for (size_t t = 20; t < 40; ++t) {
        hbo2[t] = 4.0;
        hb[t] = -2.0;
    }
    auto [i730, i850] = forward_mbll(hbo2, hb, 70.0, base);
    auto [a_hbo2, a_hb] = mbll_convert(i730, i850, 70.0, base);
    auto [b_hbo2, b_hb] = mbll_convert(i730, i850, 70.0, pvc);
    for (size_t t = 0; t < 40; ++t) {
        CHECK(b_hbo2[t] == doctest::Approx(a_hbo2[t] / 50.0).epsilon(1e-12));
        CHECK(b_hb[t] == doctest::Approx(a_hb[t] / 50.0).epsilon(1e-12));
    }
}

TEST_CASE("mbll input validation") {
    MbllParams params;
    Series a(30, 1.0), b(29, 1.0);
    CHECK_THROWS_AS(mbll_convert(a, b, 70.0, params), DataError);
    CHECK_THROWS_AS(mbll_convert({}, {}, 70.0, params), DataError);
    Series c(30, 1.0);
    c[5] = 0.0;
    CHECK_THROWS_AS(mbll_convert(a, c, 70.0, params), DataError);
}

// --- quality control ---

TEST_CASE("qc accepts healthy channels") {
    RawRecording rec = healthy_recording(400, 31);
    QcConfig cfg;
    auto mask = qc_channels(rec, cfg);
    for (int c = 0; c < kNumChannels; ++c) CHECK(mask[c]);
}

TEST_CASE("qc rejects saturated, dark, flat, and outlier-ridden channels") {
    RawRecording rec = healthy_recording(400, 32);
    QcConfig cfg;

    rec.channels[0].i730[17] = 4.0; // saturation on one sample
    std::fill(rec.channels[1].i850.begin(), rec.channels[1].i850.end(), 0.005); // dark median
    std::fill(rec.channels[2].i730.begin(), rec.channels[2].i730.end(), 1.0);   // zero variance
    for (int k = 0; k < 6; ++k) // 1.5% of samples beyond the z gate, below saturation
        rec.channels[3].i730[k * 66] = 3.0;

    auto mask = qc_channels(rec, cfg);
    CHECK_FALSE(mask[0]);
    CHECK_FALSE(mask[1]);
    CHECK_FALSE(mask[2]);
    CHECK_FALSE(mask[3]);
    for (int c = 4; c < kNumChannels; ++c) CHECK(mask[c]);
}

TEST_CASE("qc throws when every channel fails") {
    RawRecording rec = healthy_recording(400, 33);
    for (int c = 0; c < kNumChannels; ++c)
        std::fill(rec.channels[c].i730.begin(), rec.channels[c].i730.end(), 1.0);
    QcConfig cfg;
    CHECK_THROWS_AS(qc_channels(rec, cfg), DataError);
    try {
        qc_channels(rec, cfg);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("AllChannelsRejected") != std::string::npos);
    }
}

// --- smoothing spline ---

TEST_CASE("smoothing spline endpoints: identity at p=1, mean at p=0") {
    RandomStream rs(41);
    Series y(30);
    for (auto& v : y) v = rs.normal(1.0, 2.0);
    Series ident = smoothing_spline(y, 1.0);
    CHECK(ident == y);
    Series flat = smoothing_spline(y, 0.0);
    double m = 0;
    for (double v : y) m += v;
    m /= y.size();
    for (double v : flat) CHECK(v == doctest::Approx(m).epsilon(1e-12));
    CHECK_THROWS_AS(smoothing_spline(y, -0.1), ConfigError);
    CHECK_THROWS_AS(smoothing_spline(y, 1.1), ConfigError);
}

TEST_CASE("smoothing spline reproduces straight lines exactly") {
    Series y(25);
    for (size_t i = 0; i < y.size(); ++i) y[i] = 3.0 - 0.25 * static_cast<double>(i);
    for (double p : {0.01, 0.5, 0.99}) {
        Series g = smoothing_spline(y, p);
        for (size_t i = 0; i < y.size(); ++i)
            CHECK(g[i] == doctest::Approx(y[i]).epsilon(1e-9));
    }
}

TEST_CASE("smoothing spline matches a dense reference solve") {
    RandomStream rs(42);
    for (size_t n : {8u, 12u, 40u}) {
        Series y(n);
        for (auto& v : y) v = rs.normal(0.0, 1.5);
        for (double p : {0.05, 0.35, 0.9}) {
            Series fast = smoothing_spline(y, p);
            Series slow = dense_spline(y, p);
            for (size_t i = 0; i < n; ++i)
                CHECK(std::abs(fast[i] - slow[i]) < 1e-9);
        }
    }
}

TEST_CASE("smoothing spline residual shrinks as p rises") {
    RandomStream rs(43);
    Series y(50);
    for (size_t i = 0; i < y.size(); ++i)
        y[i] = std::sin(0.3 * static_cast<double>(i)) + 0.3 * rs.normal();
    double prev = 1e300;
    for (double p : {0.05, 0.3, 0.7, 0.97}) {
        Series g = smoothing_spline(y, p);
        double res = 0;
        for (size_t i = 0; i < y.size(); ++i) res += (y[i] - g[i]) * (y[i] - g[i]);
        CHECK(res < prev);
        prev = res;
    }
}

// --- motion artifact reduction ---

TEST_CASE("mara leaves a quiet series untouched away from artifacts") {
    RandomStream rs(51);
    const size_t n = 200;
    Series clean(n);
    for (auto& v : clean) v = 0.05 * rs.normal();

    double sd0 = 0, m0 = 0;
    for (double v : clean) m0 += v;
    m0 /= n;
    for (double v : clean) sd0 += (v - m0) * (v - m0);
    sd0 = std::sqrt(sd0 / n);

    // transient boxcar shorter than the moving-SD window, so every window that
    // touches it straddles an edge and the whole bump is flagged as one run
    Series noisy = clean;
    for (size_t t = 100; t < 104; ++t) noisy[t] += 8.0 * sd0;

    MaraConfig cfg;
    cfg.window_s = 3.0;
    cfg.threshold_k = 1.6;
    cfg.spline_smoothing = 0.8;
    Series out = mara_spline(noisy, cfg);
    REQUIRE(out.size() == n);

    // samples far from the artifact pass through bit-exactly
    for (size_t t = 0; t < 80; ++t) CHECK(out[t] == noisy[t]);
    for (size_t t = 130; t < n; ++t) CHECK(out[t] == noisy[t]);

    // the artifact plateau is knocked back toward the clean level
    double err_before = 0, err_after = 0;
    for (size_t t = 100; t < 104; ++t) {
        err_before += std::abs(noisy[t] - clean[t]);
        err_after += std::abs(out[t] - clean[t]);
    }
    CHECK(err_after < 0.3 * err_before);
}

TEST_CASE("mara is inert when nothing crosses the threshold") {
    RandomStream rs(52);
    Series x(150);
    for (auto& v : x) v = rs.normal(0.0, 1.0);
    MaraConfig cfg; // default threshold_k = 2: homogeneous noise never trips it
    Series out = mara_spline(x, cfg);
    CHECK(out == x);
}

TEST_CASE("mara rejects windows longer than the series") {
    MaraConfig cfg;
    cfg.window_s = 100.0;
    Series x(50, 1.0);
    CHECK_THROWS_AS(mara_spline(x, cfg), DataError);
}

// --- FIR low-pass ---

TEST_CASE("fir design meets the band specs") {
    FilterSpec spec; // 101 taps, 0.08 Hz cutoff
    Series h = design_fir(spec, kSamplingRateHz);
    REQUIRE(h.size() == 101);
    for (int k = 0; k < 101; ++k)
        CHECK(h[k] == doctest::Approx(h[100 - k]).epsilon(1e-12)); // linear phase

    double sum = 0;
    for (double v : h) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12)); // unit DC gain

    CHECK(fir_mag(h, 0.0, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    double pass = 20.0 * std::log10(fir_mag(h, 0.02, 2.0));
    CHECK(std::abs(pass) < 0.5); // passband ripple within half a dB
    CHECK(20.0 * std::log10(fir_mag(h, 0.25, 2.0)) < -40.0);
    CHECK(20.0 * std::log10(fir_mag(h, 0.5, 2.0)) < -40.0);
    CHECK(20.0 * std::log10(fir_mag(h, 0.9, 2.0)) < -40.0);
}

TEST_CASE("fir filtering attenuates fast oscillations and passes slow ones") {
    FilterSpec spec;
    const size_t n = 800;
    Series slow(n), fast(n);
    for (size_t t = 0; t < n; ++t) {
        double sec = static_cast<double>(t) / kSamplingRateHz;
        slow[t] = std::sin(2.0 * M_PI * 0.02 * sec);
        fast[t] = std::sin(2.0 * M_PI * 0.25 * sec);
    }
    Series slow_out = fir_lowpass(slow, spec);
    Series fast_out = fir_lowpass(fast, spec);
    REQUIRE(slow_out.size() == n);

    Series mid_in(slow.begin() + 150, slow.end() - 150);
    Series mid_out(slow_out.begin() + 150, slow_out.end() - 150);
    CHECK(rms(mid_out) == doctest::Approx(rms(mid_in)).epsilon(0.06));

    Series fast_mid(fast_out.begin() + 150, fast_out.end() - 150);
    CHECK(rms(fast_mid) < 0.02 * rms(fast));
}

TEST_CASE("fir group delay is compensated") {
    FilterSpec spec;
    const size_t n = 800;
    Series x(n);
    for (size_t t = 0; t < n; ++t)
        x[t] = std::sin(2.0 * M_PI * 0.02 * (static_cast<double>(t) / kSamplingRateHz));
    Series y = fir_lowpass(x, spec);
    // the filtered slow sine must line up sample-for-sample with the input
    for (size_t t = 150; t + 150 < n; ++t)
        CHECK(std::abs(y[t] - x[t]) < 0.06);
}

TEST_CASE("fir rejects series shorter than the kernel") {
    FilterSpec spec;
    Series x(100, 1.0);
    CHECK_THROWS_AS(fir_lowpass(x, spec), DataError);
    Series ok(101, 1.0);
    CHECK_NOTHROW(fir_lowpass(ok, spec));
}

TEST_CASE("fir config validation") {
    FilterSpec spec;
    spec.taps = 100;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.taps = 101;
    spec.cutoff_hz = 0.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.cutoff_hz = 1.5; // above Nyquist for 2 Hz
    CHECK_THROWS_AS(design_fir(spec, kSamplingRateHz), ConfigError);
}

// --- epoching ---

TEST_CASE("extract_epoch slices the task window on the sample grid") {
    HemoSeries hemo;
    hemo.subject_id = "S0001";
    const size_t n = 120;
    for (int c = 0; c < kNumChannels; ++c) {
        hemo.valid[c] = true;
        hemo.hbo2[c].resize(n);
        hemo.hb[c].resize(n);
        for (size_t t = 0; t < n; ++t) {
            hemo.hbo2[c][t] = static_cast<double>(t) + 1000.0 * c;
            hemo.hb[c][t] = -static_cast<double>(t);
        }
    }
    EventMarker marker{Task::STW, 5.0, 20.0, 50.0};
    TaskEpoch epoch = extract_epoch(hemo, marker);
    CHECK(epoch.task == Task::STW);
    CHECK(epoch.n_samples() == 60); // 30 s at 2 Hz
    CHECK(epoch.hbo2[0][0] == 40.0);
    CHECK(epoch.hbo2[0][59] == 99.0);
    CHECK(epoch.hbo2[3][0] == 3040.0);

    EventMarker alpha{Task::Alpha, 5.0, 20.0, 50.0};
    CHECK_THROWS_AS(extract_epoch(hemo, alpha), DataError);

    EventMarker beyond{Task::DTW, 5.0, 20.0, 80.0};
    CHECK_THROWS_AS(extract_epoch(hemo, beyond), DataError);
    try {
        extract_epoch(hemo, beyond);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("OutOfBounds") != std::string::npos);
    }
}

TEST_CASE("baseline_correct subtracts the ten seconds before the task") {
    HemoSeries hemo;
    hemo.subject_id = "S0001";
    const size_t n = 120;
    for (int c = 0; c < kNumChannels; ++c) {
        hemo.valid[c] = (c < 2);
        if (!hemo.valid[c]) continue;
        hemo.hbo2[c].assign(n, 0.0);
        hemo.hb[c].assign(n, 0.0);
        for (size_t t = 10; t < 30; ++t) hemo.hbo2[c][t] = 3.0; // baseline window level
        for (size_t t = 40; t < 100; ++t) hemo.hbo2[c][t] = 7.0;
    }
    EventMarker marker{Task::STW, 5.0, 20.0, 50.0};
    TaskEpoch epoch = extract_epoch(hemo, marker);
    TaskEpoch corrected = baseline_correct(epoch, hemo, marker);
    CHECK(corrected.hbo2[0][0] == doctest::Approx(4.0).epsilon(1e-12)); // 7 - 3
    CHECK(corrected.hb[0][0] == doctest::Approx(0.0).epsilon(1e-12));

    EventMarker bad{Task::STW, -5.0, 20.0, 50.0};
    CHECK_THROWS_AS(baseline_correct(epoch, hemo, bad), DataError);
}

// --- full pipeline ---

TEST_CASE("run_pipeline produces baseline-corrected epochs end to end") {
    EffectConfig effect;
    MbllParams mbll;
    auto cohort = generate_cohort(1, 99, effect, mbll);
    REQUIRE(cohort.size() == 1);
    PipelineConfig cfg;
    PipelineResult res = run_pipeline(cohort[0].rec, cohort[0].meta, cfg);

    CHECK(res.stw.task == Task::STW);
    CHECK(res.dtw.task == Task::DTW);
    CHECK(res.stw.n_samples() >= 40); // shortest possible task lasts 20 s at 2 Hz
    int n_valid = 0;
    for (int c = 0; c < kNumChannels; ++c)
        if (res.stw.valid[c]) ++n_valid;
    CHECK(n_valid == kNumChannels);
    for (int c = 0; c < kNumChannels; ++c) {
        if (!res.stw.valid[c]) continue;
        for (double v : res.stw.hbo2[c]) CHECK(std::isfinite(v));
        for (double v : res.dtw.hb[c]) CHECK(std::isfinite(v));
    }
}

TEST_CASE("run_pipeline reports the failing stage") {
    EffectConfig effect;
    MbllParams mbll;
    auto cohort = generate_cohort(1, 100, effect, mbll);
    PipelineConfig cfg;

    RawRecording no_dtw = cohort[0].rec;
    std::vector<EventMarker> kept;
    for (const auto& ev : no_dtw.events)
        if (ev.task != Task::DTW) kept.push_back(ev);
    no_dtw.events = kept;
    try {
        run_pipeline(no_dtw, cohort[0].meta, cfg);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage == "extract_epoch");
    }

    RawRecording flat = cohort[0].rec;
    for (int c = 0; c < kNumChannels; ++c) {
        std::fill(flat.channels[c].i730.begin(), flat.channels[c].i730.end(), 1.0);
        std::fill(flat.channels[c].i850.begin(), flat.channels[c].i850.end(), 1.0);
    }
    try {
        run_pipeline(flat, cohort[0].meta, cfg);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage == "qc");
    }

    RawRecording tiny = cohort[0].rec;
    for (int c = 0; c < kNumChannels; ++c) {
        tiny.channels[c].i730.resize(50);
        tiny.channels[c].i850.resize(50);
    }
    try {
        run_pipeline(tiny, cohort[0].meta, cfg);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage == "wavelet");
    }
}

TEST_CASE("disabling optional stages still yields epochs") {
    EffectConfig effect;
    MbllParams mbll;
    auto cohort = generate_cohort(1, 101, effect, mbll);
    PipelineConfig cfg;
    cfg.wavelet.enabled = false;
    cfg.mara.enabled = false;
    cfg.fir.enabled = false;
    PipelineResult res = run_pipeline(cohort[0].rec, cohort[0].meta, cfg);
    CHECK(res.stw.n_samples() > 0);
    CHECK(res.dtw.n_samples() > 0);
}

// --- configuration files ---

TEST_CASE("pipeline config parses sections and rejects unknown keys") {
    ConfigFile cfg = ConfigFile::parse_string("[qc]\nsaturation_level = 3.5\n"
                                              "[wavelet]\nlevels = 3\nalpha = 0.2\n"
                                              "[fir]\ntaps = 51\ncutoff = 0.1\n"
                                              "[mara]\nthreshold_k = 2.5\n");
    PipelineConfig pc = PipelineConfig::from_config(cfg);
    CHECK(pc.qc.saturation_level == 3.5);
    CHECK(pc.wavelet.levels == 3);
    CHECK(pc.wavelet.alpha == 0.2);
    CHECK(pc.fir.taps == 51);
    CHECK(pc.fir.cutoff_hz == 0.1);
    CHECK(pc.mara.threshold_k == 2.5);
    CHECK(pc.mbll.separation_d == 2.5); // untouched default

    ConfigFile bad = ConfigFile::parse_string("[qc]\nsaturation = 3.5\n");
    CHECK_THROWS_AS(PipelineConfig::from_config(bad), ConfigError);
}

TEST_CASE("bundled chromophore table matches the compiled defaults") {
    ConfigFile cfg = ConfigFile::parse_file(std::string(GAITNIRS_SOURCE_DIR) +
                                            "/data/chromophores.cfg");
    MbllParams file_params = MbllParams::from_config(cfg);
    MbllParams defaults;
    CHECK(file_params.eps_hbo2_730 == defaults.eps_hbo2_730);
    CHECK(file_params.eps_hb_730 == defaults.eps_hb_730);
    CHECK(file_params.eps_hbo2_850 == defaults.eps_hbo2_850);
    CHECK(file_params.eps_hb_850 == defaults.eps_hb_850);
    CHECK(file_params.separation_d == defaults.separation_d);
    CHECK(file_params.dpf_coeffs == defaults.dpf_coeffs);
    CHECK(file_params.partial_volume_correction == defaults.partial_volume_correction);
    CHECK(file_params.partial_volume_factor == defaults.partial_volume_factor);
}

} // TEST_SUITE
