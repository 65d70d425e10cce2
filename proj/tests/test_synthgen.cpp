#include <doctest.h>

#include "gaitnirs/errors.hpp"
#include "gaitnirs/synthgen.hpp"
#include "gaitnirs/textio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

using namespace gaitnirs;
namespace fs = std::filesystem;

namespace {

bool same_truth(const GroundTruth& a, const GroundTruth& b) {
    for (int c = 0; c < kNumChannels; ++c)
        if (a.hbo2[c] != b.hbo2[c] || a.hb[c] != b.hb[c]) return false;
    return true;
}

} // namespace

TEST_SUITE("synthgen") {

TEST_CASE("cohort generation is deterministic in the seed") {
    EffectConfig effect;
    MbllParams mbll;
    auto a = generate_cohort(5, 123, effect, mbll);
    auto b = generate_cohort(5, 123, effect, mbll);
    REQUIRE(a.size() == 5);
    REQUIRE(b.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(a[i].meta == b[i].meta);
        CHECK(a[i].rec == b[i].rec);
        CHECK(same_truth(a[i].truth, b[i].truth));
    }

    auto c = generate_cohort(5, 124, effect, mbll);
    bool all_same = true;
    for (size_t i = 0; i < 5; ++i)
        if (!(a[i].rec == c[i].rec)) all_same = false;
    CHECK_FALSE(all_same);
}

TEST_CASE("each subject is generated from its own stream") {
    // growing the cohort must not change earlier subjects
    EffectConfig effect;
    MbllParams mbll;
    auto small = generate_cohort(3, 55, effect, mbll);
    auto large = generate_cohort(6, 55, effect, mbll);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(small[i].meta == large[i].meta);
        CHECK(small[i].rec == large[i].rec);
        CHECK(same_truth(small[i].truth, large[i].truth));
    }
}

TEST_CASE("generation does not depend on the worker thread count") {
    EffectConfig effect;
    MbllParams mbll;
    setenv("GAITNIRS_THREADS", "1", 1);
    auto serial = generate_cohort(6, 77, effect, mbll);
    setenv("GAITNIRS_THREADS", "3", 1);
    auto parallel = generate_cohort(6, 77, effect, mbll);
    unsetenv("GAITNIRS_THREADS");
    for (size_t i = 0; i < 6; ++i) {
        CHECK(serial[i].meta == parallel[i].meta);
        CHECK(serial[i].rec == parallel[i].rec);
    }
}

TEST_CASE("empty cohorts are rejected") {
    EffectConfig effect;
    MbllParams mbll;
    CHECK_THROWS_AS(generate_cohort(0, 1, effect, mbll), DataError);
    try {
        generate_cohort(0, 1, effect, mbll);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("EmptyCohort") != std::string::npos);
    }
}

TEST_CASE("task order rotates through a 3-cycle") {
    auto o0 = task_order(0);
    auto o1 = task_order(1);
    auto o2 = task_order(2);
    CHECK(o0 == task_order(3));
    CHECK(o1 == task_order(4));
    CHECK(o2 == task_order(5));
    for (auto& o : {o0, o1, o2}) {
        std::set<Task> seen(o.begin(), o.end());
        CHECK(seen.size() == 3); // every condition exactly once
    }
    // every condition appears in every slot across the cycle
    for (int slot = 0; slot < 3; ++slot) {
        std::set<Task> at_slot = {o0[slot], o1[slot], o2[slot]};
        CHECK(at_slot.size() == 3);
    }
}

TEST_CASE("subject metadata respects the cohort distributions") {
    EffectConfig effect;
    MbllParams mbll;
    auto cohort = generate_cohort(40, 9, effect, mbll);
    for (size_t i = 0; i < cohort.size(); ++i) {
        const SubjectMeta& m = cohort[i].meta;
        CHECK(m.age >= 65.0);
        CHECK(m.age <= 95.0);
        CHECK(m.rbans >= 40);
        CHECK(m.rbans <= 160);
        char buf[16];
        std::snprintf(buf, sizeof buf, "S%04zu", i + 1);
        CHECK(m.subject_id == buf);
    }
    int female = 0;
    for (const auto& s : cohort)
        if (s.meta.gender == Gender::Female) ++female;
    CHECK(female > 5);
    CHECK(female < 35);
}

TEST_CASE("recordings carry three ordered markers with fixed baselines") {
    EffectConfig effect;
    MbllParams mbll;
    auto cohort = generate_cohort(9, 31, effect, mbll);
    for (const auto& subject : cohort) {
        const auto& events = subject.rec.events;
        REQUIRE(events.size() == 3);
        std::set<Task> seen;
        double prev_end = 0;
        for (const auto& ev : events) {
            seen.insert(ev.task);
            CHECK(ev.task_start - ev.baseline_start == doctest::Approx(10.0).epsilon(1e-12));
            CHECK(ev.baseline_start >= prev_end);
            double dur = ev.task_end - ev.task_start;
            CHECK(dur >= 20.0 - 1e-9);
            CHECK(dur <= 100.0 + 1e-9);
            // all times sit on the 0.5 s sample grid
            for (double ts : {ev.baseline_start, ev.task_start, ev.task_end})
                CHECK(std::abs(ts * 2.0 - std::round(ts * 2.0)) < 1e-9);
            prev_end = ev.task_end;
        }
        CHECK(seen.size() == 3);
        CHECK(events[0].baseline_start == doctest::Approx(effect.lead_in_s).epsilon(1e-12));
        // recording extends past the last marker
        double last_sample = (subject.rec.n_samples() - 1) / kSamplingRateHz;
        CHECK(last_sample >= events[2].task_end);
    }
}

TEST_CASE("intensities are positive and near the reference level") {
    EffectConfig effect;
    MbllParams mbll;
    auto cohort = generate_cohort(3, 57, effect, mbll);
    for (const auto& subject : cohort) {
        for (int c = 0; c < kNumChannels; ++c) {
            for (double v : subject.rec.channels[c].i730) {
                CHECK(v > 0.0);
                CHECK(v < 10.0);
            }
            for (double v : subject.rec.channels[c].i850) CHECK(v > 0.0);
        }
    }
}

TEST_CASE("intensities invert exactly to the stored ground truth") {
    EffectConfig effect;
    MbllParams params;
    auto cohort = generate_cohort(2, 63, effect, params);
    for (const auto& subject : cohort) {
        double k730 = params.separation_d * dpf(730.0, subject.meta.age, params) / 1000.0;
        double k850 = params.separation_d * dpf(850.0, subject.meta.age, params) / 1000.0;
        double det = params.eps_hbo2_730 * params.eps_hb_850 -
                     params.eps_hb_730 * params.eps_hbo2_850;
        for (int c = 0; c < kNumChannels; ++c) {
            const Series& i730 = subject.rec.channels[c].i730;
            const Series& i850 = subject.rec.channels[c].i850;
            REQUIRE(i730.size() == subject.truth.hbo2[c].size());
            for (size_t t = 0; t < i730.size(); t += 7) {
                double od730 = -std::log10(i730[t] / effect.i0) / k730;
                double od850 = -std::log10(i850[t] / effect.i0) / k850;
                double hbo2 = (od730 * params.eps_hb_850 - params.eps_hb_730 * od850) / det;
                double hb = (params.eps_hbo2_730 * od850 - od730 * params.eps_hbo2_850) / det;
                CHECK(std::abs(hbo2 - subject.truth.hbo2[c][t]) < 1e-9);
                CHECK(std::abs(hb - subject.truth.hb[c][t]) < 1e-9);
            }
        }
    }
}

TEST_CASE("the dtw condition carries more oxygenation change than stw") {
    // with per-subject variation suppressed, mean |HbO2| during the task
    // window must be larger for DTW than STW for every subject
    EffectConfig effect;
    effect.subject_gain_sigma = 0.0;
    effect.cond_gain_sigma = 0.0;
    effect.channel_scale_sigma = 0.0;
    effect.subject_offset_sd = 0.0;
    effect.noise_sd = 0.01;
    effect.spike_rate = 0.0;
    effect.mayer_amp = 0.0;
    effect.resp_amp = 0.0;
    effect.drift_slope = 0.0;
    MbllParams mbll;
    auto cohort = generate_cohort(6, 11, effect, mbll);
    for (const auto& subject : cohort) {
        double mean_abs[2] = {0, 0}; // stw, dtw
        for (const auto& ev : subject.rec.events) {
            if (ev.task == Task::Alpha) continue;
            int which = ev.task == Task::STW ? 0 : 1;
            size_t a = static_cast<size_t>(ev.task_start * kSamplingRateHz);
            size_t b = static_cast<size_t>(ev.task_end * kSamplingRateHz);
            double acc = 0;
            for (size_t t = a; t < b; ++t) acc += std::abs(subject.truth.hbo2[0][t]);
            mean_abs[which] = acc / (b - a);
        }
        CHECK(mean_abs[1] > mean_abs[0]);
    }
}

TEST_CASE("written cohorts load back identically") {
    fs::path dir = fs::temp_directory_path() / "gaitnirs_synth_rt";
    fs::remove_all(dir);
    EffectConfig effect;
    MbllParams mbll;
    auto cohort = generate_cohort(3, 200, effect, mbll);
    write_synth_cohort(dir, cohort);

    CHECK(fs::exists(dir / "subjects.csv"));
    CHECK(fs::exists(dir / "S0001_raw.csv"));
    CHECK(fs::exists(dir / "S0002_events.csv"));
    CHECK(fs::exists(dir / "ground_truth" / "S0003.csv"));

    Cohort back = load_cohort(dir);
    REQUIRE(back.subjects.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back.subjects[i] == cohort[i].meta);
        CHECK(back.recordings[i] == cohort[i].rec);
    }
    GroundTruth truth = load_ground_truth(dir / "ground_truth" / "S0002.csv");
    CHECK(same_truth(truth, cohort[1].truth));
    fs::remove_all(dir);
}

TEST_CASE("effect config validation catches inconsistent settings") {
    EffectConfig ok;
    CHECK_NOTHROW(ok.validate());

    EffectConfig bad = ok;
    bad.dtw_hbo2_amp = 0.5 * ok.stw_hbo2_amp;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = ok;
    bad.noise_sd = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = ok;
    bad.stw_duration_min = 50.0;
    bad.stw_duration_max = 40.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = ok;
    bad.lead_in_s = 5.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = ok;
    bad.i0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("effect config reads the synth section and rejects typos") {
    ConfigFile cfg = ConfigFile::parse_string("[synth]\nstw_hbo2_amp = 1.2\n"
                                              "dtw_hbo2_amp = 1.5\nnoise_sd = 0.2\n");
    EffectConfig ec = EffectConfig::from_config(cfg);
    CHECK(ec.stw_hbo2_amp == 1.2);
    CHECK(ec.dtw_hbo2_amp == 1.5);
    CHECK(ec.noise_sd == 0.2);
    CHECK(ec.mayer_amp == EffectConfig{}.mayer_amp);

    ConfigFile bad = ConfigFile::parse_string("[synth]\nstw_amp = 1.2\n");
    CHECK_THROWS_AS(EffectConfig::from_config(bad), ConfigError);
}

TEST_CASE("effect config serializes every field to key-value pairs") {
    EffectConfig ec;
    std::vector<std::pair<std::string, std::string>> kv;
    ec.to_kv(kv);
    auto find = [&](const std::string& key) {
        for (const auto& [k, v] : kv)
            if (k.find(key) != std::string::npos) return v;
        return std::string();
    };
    CHECK(find("stw_hbo2_amp") == fmt_double(ec.stw_hbo2_amp));
    CHECK(find("dtw_load_amp") == fmt_double(ec.dtw_load_amp));
    CHECK(find("lead_in") == fmt_double(ec.lead_in_s));
    CHECK(kv.size() >= 25);
}

} // TEST_SUITE
