#include "gaitnirs/synthgen.hpp"
#include "gaitnirs/errors.hpp"
#include "gaitnirs/parallel.hpp"
#include "gaitnirs/textio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gaitnirs {

void EffectConfig::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    for (double v : {stw_hbo2_amp, dtw_hbo2_amp, hb_amp_ratio, noise_sd, mayer_amp, resp_amp,
                     drift_slope, spike_amp, dtw_load_amp, subject_offset_sd, i0})
        if (!finite(v)) throw ConfigError("synth: amplitudes must be finite");
    if (dtw_hbo2_amp < stw_hbo2_amp)
        throw ConfigError("synth: dtw_hbo2_amp must be >= stw_hbo2_amp");
    if (noise_sd < 0 || spike_rate < 0 || spike_amp < 0)
        throw ConfigError("synth: rates and noise must be >= 0");
    if (mayer_freq < 0 || resp_freq < 0) throw ConfigError("synth: frequencies must be >= 0");
    if (stw_duration_min > stw_duration_max || dtw_duration_min > dtw_duration_max)
        throw ConfigError("synth: duration ranges must be non-empty");
    if (stw_duration_min <= 0 || dtw_duration_min <= 0 || alpha_duration_s <= 0)
        throw ConfigError("synth: durations must be positive");
    if (duration_tail_prob < 0 || duration_tail_prob > 1)
        throw ConfigError("synth: duration_tail_prob must be in [0,1]");
    if (load_onset_min_s > load_onset_max_s || load_onset_min_s < 0)
        throw ConfigError("synth: load onset range must be non-empty and >= 0");
    if (load_tau_s <= 0 || rise_s <= 0) throw ConfigError("synth: time constants must be positive");
    if (response_latency_max_s < 0) throw ConfigError("synth: latency must be >= 0");
    for (double s : {subject_gain_sigma, cond_gain_sigma, channel_scale_sigma})
        if (s < 0) throw ConfigError("synth: gain sigmas must be >= 0");
    if (!(i0 > 0)) throw ConfigError("synth: i0 must be positive");
    if (lead_in_s < 10.0) throw ConfigError("synth: lead_in must be at least 10 s");
    if (rest_s < 0) throw ConfigError("synth: rest must be >= 0");
}

EffectConfig EffectConfig::from_config(const ConfigFile& cfg) {
    cfg.check_keys("synth", {"stw_hbo2_amp", "dtw_hbo2_amp", "hb_amp_ratio", "noise_sd",
                             "mayer_amp", "mayer_freq", "resp_amp", "resp_freq", "drift_slope",
                             "spike_rate", "spike_amp", "stw_duration_min", "stw_duration_max",
                             "dtw_duration_min", "dtw_duration_max", "duration_tail_prob",
                             "alpha_duration", "dtw_load_amp", "load_tau", "load_onset_min",
                             "load_onset_max", "response_latency_max", "rise",
                             "subject_gain_sigma", "cond_gain_sigma", "channel_scale_sigma",
                             "subject_offset_sd", "lead_in", "rest", "i0"});
    EffectConfig e;
    e.stw_hbo2_amp = cfg.get_double("synth", "stw_hbo2_amp", e.stw_hbo2_amp);
    e.dtw_hbo2_amp = cfg.get_double("synth", "dtw_hbo2_amp", e.dtw_hbo2_amp);
    e.hb_amp_ratio = cfg.get_double("synth", "hb_amp_ratio", e.hb_amp_ratio);
    e.noise_sd = cfg.get_double("synth", "noise_sd", e.noise_sd);
    e.mayer_amp = cfg.get_double("synth", "mayer_amp", e.mayer_amp);
    e.mayer_freq = cfg.get_double("synth", "mayer_freq", e.mayer_freq);
    e.resp_amp = cfg.get_double("synth", "resp_amp", e.resp_amp);
    e.resp_freq = cfg.get_double("synth", "resp_freq", e.resp_freq);
    e.drift_slope = cfg.get_double("synth", "drift_slope", e.drift_slope);
    e.spike_rate = cfg.get_double("synth", "spike_rate", e.spike_rate);
    e.spike_amp = cfg.get_double("synth", "spike_amp", e.spike_amp);
    e.stw_duration_min = cfg.get_double("synth", "stw_duration_min", e.stw_duration_min);
    e.stw_duration_max = cfg.get_double("synth", "stw_duration_max", e.stw_duration_max);
    e.dtw_duration_min = cfg.get_double("synth", "dtw_duration_min", e.dtw_duration_min);
    e.dtw_duration_max = cfg.get_double("synth", "dtw_duration_max", e.dtw_duration_max);
    e.duration_tail_prob = cfg.get_double("synth", "duration_tail_prob", e.duration_tail_prob);
    e.alpha_duration_s = cfg.get_double("synth", "alpha_duration", e.alpha_duration_s);
    e.dtw_load_amp = cfg.get_double("synth", "dtw_load_amp", e.dtw_load_amp);
    e.load_tau_s = cfg.get_double("synth", "load_tau", e.load_tau_s);
    e.load_onset_min_s = cfg.get_double("synth", "load_onset_min", e.load_onset_min_s);
    e.load_onset_max_s = cfg.get_double("synth", "load_onset_max", e.load_onset_max_s);
    e.response_latency_max_s = cfg.get_double("synth", "response_latency_max", e.response_latency_max_s);
    e.rise_s = cfg.get_double("synth", "rise", e.rise_s);
    e.subject_gain_sigma = cfg.get_double("synth", "subject_gain_sigma", e.subject_gain_sigma);
    e.cond_gain_sigma = cfg.get_double("synth", "cond_gain_sigma", e.cond_gain_sigma);
    e.channel_scale_sigma = cfg.get_double("synth", "channel_scale_sigma", e.channel_scale_sigma);
    e.subject_offset_sd = cfg.get_double("synth", "subject_offset_sd", e.subject_offset_sd);
    e.lead_in_s = cfg.get_double("synth", "lead_in", e.lead_in_s);
    e.rest_s = cfg.get_double("synth", "rest", e.rest_s);
    e.i0 = cfg.get_double("synth", "i0", e.i0);
    e.validate();
    return e;
}

void EffectConfig::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("synth.stw_hbo2_amp", fmt_double(stw_hbo2_amp));
    kv.emplace_back("synth.dtw_hbo2_amp", fmt_double(dtw_hbo2_amp));
    kv.emplace_back("synth.hb_amp_ratio", fmt_double(hb_amp_ratio));
    kv.emplace_back("synth.noise_sd", fmt_double(noise_sd));
    kv.emplace_back("synth.mayer_amp", fmt_double(mayer_amp));
    kv.emplace_back("synth.mayer_freq", fmt_double(mayer_freq));
    kv.emplace_back("synth.resp_amp", fmt_double(resp_amp));
    kv.emplace_back("synth.resp_freq", fmt_double(resp_freq));
    kv.emplace_back("synth.drift_slope", fmt_double(drift_slope));
    kv.emplace_back("synth.spike_rate", fmt_double(spike_rate));
    kv.emplace_back("synth.spike_amp", fmt_double(spike_amp));
    kv.emplace_back("synth.stw_duration_min", fmt_double(stw_duration_min));
    kv.emplace_back("synth.stw_duration_max", fmt_double(stw_duration_max));
    kv.emplace_back("synth.dtw_duration_min", fmt_double(dtw_duration_min));
    kv.emplace_back("synth.dtw_duration_max", fmt_double(dtw_duration_max));
    kv.emplace_back("synth.duration_tail_prob", fmt_double(duration_tail_prob));
    kv.emplace_back("synth.alpha_duration", fmt_double(alpha_duration_s));
    kv.emplace_back("synth.dtw_load_amp", fmt_double(dtw_load_amp));
    kv.emplace_back("synth.load_tau", fmt_double(load_tau_s));
    kv.emplace_back("synth.load_onset_min", fmt_double(load_onset_min_s));
    kv.emplace_back("synth.load_onset_max", fmt_double(load_onset_max_s));
    kv.emplace_back("synth.response_latency_max", fmt_double(response_latency_max_s));
    kv.emplace_back("synth.rise", fmt_double(rise_s));
    kv.emplace_back("synth.subject_gain_sigma", fmt_double(subject_gain_sigma));
    kv.emplace_back("synth.cond_gain_sigma", fmt_double(cond_gain_sigma));
    kv.emplace_back("synth.channel_scale_sigma", fmt_double(channel_scale_sigma));
    kv.emplace_back("synth.subject_offset_sd", fmt_double(subject_offset_sd));
    kv.emplace_back("synth.lead_in", fmt_double(lead_in_s));
    kv.emplace_back("synth.rest", fmt_double(rest_s));
    kv.emplace_back("synth.i0", fmt_double(i0));
}

std::pair<Series, Series> forward_mbll(const Series& hbo2_um, const Series& hb_um, double age,
                                       const MbllParams& params, double i0) {
    if (hbo2_um.size() != hb_um.size()) throw DataError("forward_mbll: series lengths differ");
    double k730 = params.separation_d * dpf(730.0, age, params) / 1000.0;
    double k850 = params.separation_d * dpf(850.0, age, params) / 1000.0;
    Series i730(hbo2_um.size()), i850(hbo2_um.size());
    for (size_t t = 0; t < hbo2_um.size(); ++t) {
        if (!std::isfinite(hbo2_um[t]) || !std::isfinite(hb_um[t]))
            throw DataError("forward_mbll: non-finite concentration at sample " + std::to_string(t));
        double od730 = (params.eps_hbo2_730 * hbo2_um[t] + params.eps_hb_730 * hb_um[t]) * k730;
        double od850 = (params.eps_hbo2_850 * hbo2_um[t] + params.eps_hb_850 * hb_um[t]) * k850;
        i730[t] = i0 * std::pow(10.0, -od730);
        i850[t] = i0 * std::pow(10.0, -od850);
    }
    return {std::move(i730), std::move(i850)};
}

std::array<Task, 3> task_order(size_t subject_idx) {
    switch (subject_idx % 3) {
        case 0: return {Task::STW, Task::Alpha, Task::DTW};
        case 1: return {Task::Alpha, Task::DTW, Task::STW};
        default: return {Task::DTW, Task::STW, Task::Alpha};
    }
}

namespace {

double snap_half_second(double v) { return std::round(v * 2.0) / 2.0; }

struct TaskDraw {
    double duration = 0;
    double latency = 0;   // response onset after task start
    double gain = 1;      // condition-level log-normal gain
    double load_onset = 0; // DTW only
};

} // namespace

std::pair<RawRecording, GroundTruth> generate_session(const SubjectMeta& subject,
                                                      const EffectConfig& cfg,
                                                      const MbllParams& mbll,
                                                      RandomStream& stream,
                                                      size_t subject_idx) {
    cfg.validate();

    // Fixed draw order keeps the stream layout stable: subject-level factors,
    // per-channel factors, then per-task factors, then per-channel sample noise.
    double subj_gain = stream.lognormal(cfg.subject_gain_sigma);
    double subj_offset = stream.normal(0.0, cfg.subject_offset_sd);
    double load_gain = stream.lognormal(cfg.cond_gain_sigma);

    std::array<double, kNumChannels> ch_scale{};
    std::array<double, kNumChannels> mayer_phase{}, resp_phase{};
    for (int c = 0; c < kNumChannels; ++c) {
        ch_scale[c] = stream.lognormal(cfg.channel_scale_sigma);
        mayer_phase[c] = stream.uniform(0.0, 2.0 * std::numbers::pi);
        resp_phase[c] = stream.uniform(0.0, 2.0 * std::numbers::pi);
    }

    auto order = task_order(subject_idx);
    std::array<TaskDraw, 3> draws;
    for (int k = 0; k < 3; ++k) {
        TaskDraw d;
        Task task = order[k];
        if (task == Task::Alpha) {
            d.duration = cfg.alpha_duration_s;
        } else if (stream.bernoulli(cfg.duration_tail_prob)) {
            d.duration = snap_half_second(stream.uniform(20.0, 100.0));
        } else if (task == Task::STW) {
            d.duration = snap_half_second(stream.uniform(cfg.stw_duration_min, cfg.stw_duration_max));
        } else {
            d.duration = snap_half_second(stream.uniform(cfg.dtw_duration_min, cfg.dtw_duration_max));
        }
        d.latency = stream.uniform(0.0, cfg.response_latency_max_s);
        d.gain = stream.lognormal(cfg.cond_gain_sigma);
        if (task == Task::DTW)
            d.load_onset = stream.uniform(cfg.load_onset_min_s, cfg.load_onset_max_s);
        draws[k] = d;
    }

    // timeline: lead-in rest, then per task: 10 s baseline + task + rest
    RawRecording rec;
    rec.subject_id = subject.subject_id;
    double cursor = cfg.lead_in_s;
    for (int k = 0; k < 3; ++k) {
        EventMarker ev;
        ev.task = order[k];
        ev.baseline_start = cursor;
        ev.task_start = cursor + 10.0;
        ev.task_end = ev.task_start + draws[k].duration;
        rec.events.push_back(ev);
        cursor = ev.task_end + cfg.rest_s;
    }
    size_t n = static_cast<size_t>(std::llround(cursor * kSamplingRateHz));

    // clean per-task response shape shared by all channels (before channel scale)
    Series response(n, 0.0);
    for (int k = 0; k < 3; ++k) {
        const EventMarker& ev = rec.events[k];
        const TaskDraw& d = draws[k];
        double amp0 = (ev.task == Task::DTW) ? cfg.dtw_hbo2_amp : cfg.stw_hbo2_amp;
        double amp = amp0 * subj_gain * d.gain + subj_offset;
        size_t t0 = static_cast<size_t>(std::llround(ev.baseline_start * kSamplingRateHz));
        size_t t1 = static_cast<size_t>(std::llround((ev.task_end + cfg.rise_s) * kSamplingRateHz));
        t1 = std::min(t1, n);
        for (size_t t = t0; t < t1; ++t) {
            double ts = static_cast<double>(t) / kSamplingRateHz;
            double up = std::clamp((ts - ev.task_start - d.latency) / cfg.rise_s, 0.0, 1.0);
            double down = std::clamp((ev.task_end + cfg.rise_s - ts) / cfg.rise_s, 0.0, 1.0);
            double trap = std::min(up, down);
            double v = amp * trap;
            if (ev.task == Task::DTW && cfg.dtw_load_amp != 0.0) {
                double ramp = std::clamp((ts - ev.task_start - d.load_onset) / cfg.load_tau_s, 0.0, 1.0);
                v += subj_gain * load_gain * cfg.dtw_load_amp * ramp * down;
            }
            response[t] += v;
        }
    }

    GroundTruth truth;
    std::array<Series, kNumChannels> i730s, i850s;
    for (int c = 0; c < kNumChannels; ++c) {
        Series hbo2(n), hb(n);
        for (size_t t = 0; t < n; ++t) {
            double ts = static_cast<double>(t) / kSamplingRateHz;
            double resp_part = ch_scale[c] * response[t];
            double artifacts = 0.0;
            if (cfg.mayer_amp != 0)
                artifacts += cfg.mayer_amp *
                             std::sin(2 * std::numbers::pi * cfg.mayer_freq * ts + mayer_phase[c]);
            if (cfg.resp_amp != 0)
                artifacts += cfg.resp_amp *
                             std::sin(2 * std::numbers::pi * cfg.resp_freq * ts + resp_phase[c]);
            artifacts += cfg.drift_slope * ts / 60.0;
            double noise = cfg.noise_sd > 0 ? stream.normal(0.0, cfg.noise_sd) : 0.0;
            hbo2[t] = resp_part + artifacts + noise;
            double hb_noise = cfg.noise_sd > 0 ? stream.normal(0.0, cfg.noise_sd) : 0.0;
            hb[t] = cfg.hb_amp_ratio * resp_part + hb_noise;
        }
        // motion spikes on the HbO2 channel
        if (cfg.spike_rate > 0 && cfg.spike_amp > 0 && cfg.noise_sd > 0) {
            double minutes = static_cast<double>(n) / kSamplingRateHz / 60.0;
            int count = stream.poisson(cfg.spike_rate * minutes);
            for (int s = 0; s < count; ++s) {
                size_t pos = static_cast<size_t>(stream.uniform_int(n));
                double sign = stream.bernoulli(0.5) ? 1.0 : -1.0;
                hbo2[pos] += sign * cfg.spike_amp * cfg.noise_sd;
            }
        }
        auto [i730, i850] = forward_mbll(hbo2, hb, subject.age, mbll, cfg.i0);
        truth.hbo2[c] = std::move(hbo2);
        truth.hb[c] = std::move(hb);
        i730s[c] = std::move(i730);
        i850s[c] = std::move(i850);
    }
    for (int c = 0; c < kNumChannels; ++c) {
        rec.channels[c].i730 = std::move(i730s[c]);
        rec.channels[c].i850 = std::move(i850s[c]);
    }
    return {std::move(rec), std::move(truth)};
}

std::vector<SynthSubject> generate_cohort(size_t n, uint64_t seed, const EffectConfig& cfg,
                                          const MbllParams& mbll) {
    if (n == 0) throw DataError("EmptyCohort: requested cohort of 0 subjects");
    cfg.validate();
    mbll.validate();
    RandomStream master(seed);
    std::vector<SynthSubject> cohort(n);
    parallel_for(n, [&](size_t i) {
        RandomStream stream = master.child(i);
        SubjectMeta meta;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "S%04zu", i + 1);
        meta.subject_id = buf;
        meta.age = std::clamp(stream.normal(76.16, 6.67), 65.0, 95.0);
        meta.gender = stream.bernoulli(0.5) ? Gender::Female : Gender::Male;
        meta.rbans = static_cast<int>(std::clamp(std::llround(stream.normal(91.77, 11.71)),
                                                 40ll, 160ll));
        auto [rec, truth] = generate_session(meta, cfg, mbll, stream, i);
        cohort[i] = {std::move(meta), std::move(rec), std::move(truth)};
    });
    return cohort;
}

namespace {

std::string ground_truth_to_csv(const GroundTruth& truth) {
    std::string out = "t_s,channel,hbo2_um,hb_um\n";
    size_t n = truth.hbo2[0].size();
    for (size_t t = 0; t < n; ++t) {
        std::string ts = fmt_double(static_cast<double>(t) / kSamplingRateHz);
        for (int c = 0; c < kNumChannels; ++c) {
            out += ts;
            out += ',';
            out += fmt_int(c + 1);
            out += ',';
            out += fmt_double(truth.hbo2[c][t]);
            out += ',';
            out += fmt_double(truth.hb[c][t]);
            out += '\n';
        }
    }
    return out;
}

} // namespace

void write_synth_cohort(const std::filesystem::path& dir, const std::vector<SynthSubject>& cohort) {
    std::filesystem::create_directories(dir / "ground_truth");
    std::vector<SubjectMeta> subjects;
    subjects.reserve(cohort.size());
    for (const auto& s : cohort) subjects.push_back(s.meta);
    write_subjects_csv(dir / "subjects.csv", subjects);
    for (const auto& s : cohort) {
        write_text_file(dir / (s.meta.subject_id + "_raw.csv"), raw_to_csv(s.rec));
        write_text_file(dir / (s.meta.subject_id + "_events.csv"), events_to_csv(s.rec.events));
        write_text_file(dir / "ground_truth" / (s.meta.subject_id + ".csv"),
                        ground_truth_to_csv(s.truth));
    }
}

GroundTruth load_ground_truth(const std::filesystem::path& file) {
    auto lines = read_lines(file);
    if (lines.empty() || lines[0] != "t_s,channel,hbo2_um,hb_um")
        throw DataError(file.string() + ": bad ground truth header");
    GroundTruth truth;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split_csv(lines[i]);
        std::string ctx = file.string() + ":" + std::to_string(i + 1);
        if (f.size() != 4) throw DataError(ctx + ": expected 4 fields");
        long long chan = parse_int(f[1], ctx);
        if (chan < 1 || chan > kNumChannels) throw DataError(ctx + ": channel outside 1..16");
        truth.hbo2[chan - 1].push_back(parse_double(f[2], ctx));
        truth.hb[chan - 1].push_back(parse_double(f[3], ctx));
    }
    return truth;
}

} // namespace gaitnirs
