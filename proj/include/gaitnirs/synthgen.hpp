#pragma once
#include "gaitnirs/core.hpp"
#include "gaitnirs/preprocess.hpp"
#include "gaitnirs/random.hpp"

namespace gaitnirs {

// Forward hemodynamic + optical model. Per channel the HbO2 change is
//   channel_scale * [ (amp * gain + subject_offset) * trapezoid(t)
//                     + dtw load ramp (DTW only) ]
//   + Mayer wave + respiration + drift + noise + motion spikes,
// and Hb = hb_amp_ratio * (the response part) + independent noise.
// The slow DTW "task load" ramp is what makes class separability emerge over
// time: it starts load_onset seconds into the task and saturates over
// load_tau_s, so short observation horizons see much less of the difference.
struct EffectConfig {
    double stw_hbo2_amp = 1.0; // µM plateau
    double dtw_hbo2_amp = 1.15;
    double hb_amp_ratio = -0.35;
    double noise_sd = 0.15;

    double mayer_amp = 0.3;
    double mayer_freq = 0.1; // Hz
    double resp_amp = 0.2;
    double resp_freq = 0.3;
    double drift_slope = 0.05; // µM per minute
    double spike_rate = 0.5;   // events per minute
    double spike_amp = 8.0;    // multiples of noise_sd

    double stw_duration_min = 30.0, stw_duration_max = 40.0; // s
    double dtw_duration_min = 35.0, dtw_duration_max = 50.0;
    double duration_tail_prob = 0.04; // outlier durations in [20,100] s
    double alpha_duration_s = 30.0;

    double dtw_load_amp = 1.1;   // µM, slow cognitive-load component (DTW only)
    double load_tau_s = 40.0;    // ramp time constant
    double load_onset_min_s = 15.0, load_onset_max_s = 28.0;
    double response_latency_max_s = 8.0; // onset latency U[0, max] per task
    double rise_s = 5.0;                 // trapezoid rise/fall time

    double subject_gain_sigma = 0.30;  // log-normal, shared across a subject's tasks
    double cond_gain_sigma = 0.16;     // log-normal, per task condition
    double channel_scale_sigma = 0.20; // log-normal, per channel
    double subject_offset_sd = 0.8;    // Normal amplitude offset, shared across tasks

    double lead_in_s = 20.0;  // rest before the first baseline
    double rest_s = 15.0;     // rest after each task
    double i0 = 1.0;          // reference intensity

    void validate() const;
    static EffectConfig from_config(const ConfigFile& cfg); // [synth] section
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
};

struct GroundTruth {
    std::array<Series, kNumChannels> hbo2;
    std::array<Series, kNumChannels> hb;
};

struct SynthSubject {
    SubjectMeta meta;
    RawRecording rec;
    GroundTruth truth;
};

// I(lambda,t) = i0 * 10^(-(eps_hbo2*hbo2 + eps_hb*hb)/1000 * d * DPF(lambda,age))
std::pair<Series, Series> forward_mbll(const Series& hbo2_um, const Series& hb_um, double age,
                                       const MbllParams& params, double i0 = 1.0);

// Latin-square task order by subject index mod 3.
std::array<Task, 3> task_order(size_t subject_idx);

std::pair<RawRecording, GroundTruth> generate_session(const SubjectMeta& subject,
                                                      const EffectConfig& cfg,
                                                      const MbllParams& mbll,
                                                      RandomStream& stream,
                                                      size_t subject_idx);

std::vector<SynthSubject> generate_cohort(size_t n, uint64_t seed, const EffectConfig& cfg,
                                          const MbllParams& mbll);

void write_synth_cohort(const std::filesystem::path& dir, const std::vector<SynthSubject>& cohort);
GroundTruth load_ground_truth(const std::filesystem::path& file);

} // namespace gaitnirs
