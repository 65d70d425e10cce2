#include "gaitnirs/features.hpp"
#include "gaitnirs/errors.hpp"
#include "gaitnirs/parallel.hpp"
#include "gaitnirs/textio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace gaitnirs {

FeatureMask full_mask() {
    FeatureMask m;
    m.fill(true);
    return m;
}

FeatureMask mask_from_indices(const std::vector<int>& indices) {
    FeatureMask m{};
    for (int i : indices) {
        if (i < 0 || i >= kNumFeatures)
            throw ConfigError("feature mask index " + std::to_string(i) + " outside 0..21");
        m[i] = true;
    }
    return m;
}

int mask_dim(const FeatureMask& mask) {
    int d = 0;
    for (bool b : mask) d += b;
    return d;
}

uint32_t mask_to_bits(const FeatureMask& mask) {
    uint32_t bits = 0;
    for (int i = 0; i < kNumFeatures; ++i)
        if (mask[i]) bits |= (1u << i);
    return bits;
}

FeatureMask mask_from_bits(uint32_t bits) {
    FeatureMask m{};
    for (int i = 0; i < kNumFeatures; ++i) m[i] = (bits >> i) & 1u;
    return m;
}

TaskEpoch truncate_epoch(const TaskEpoch& epoch, double horizon_s) {
    if (!(horizon_s > 0)) throw ConfigError("horizon must be positive");
    size_t n = epoch.n_samples();
    if (n == 0) throw DataError(epoch.subject_id + ": empty epoch");
    size_t keep = std::min(n, static_cast<size_t>(std::llround(horizon_s * kSamplingRateHz)));
    TaskEpoch out = epoch;
    for (int c = 0; c < kNumChannels; ++c) {
        if (!out.valid[c]) continue;
        out.hbo2[c].resize(std::min(out.hbo2[c].size(), keep));
        out.hb[c].resize(std::min(out.hb[c].size(), keep));
    }
    return out;
}

ChannelStats channel_stats(const Series& samples) {
    size_t n = samples.size();
    if (n < 4)
        throw DataError("TooShort: channel statistics need at least 4 samples, got " +
                        std::to_string(n));
    ChannelStats st;
    st.max = samples[0];
    st.min = samples[0];
    double sum = 0;
    for (double v : samples) {
        st.max = std::max(st.max, v);
        st.min = std::min(st.min, v);
        sum += v;
    }
    st.mean = sum / static_cast<double>(n);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : samples) {
        double d = v - st.mean;
        double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 <= 0) {
        st.degenerate = true;
        return st;
    }
    st.skewness = m3 / std::pow(m2, 1.5);
    st.kurtosis = m4 / (m2 * m2) - 3.0;
    return st;
}

std::pair<std::array<double, 5>, std::array<double, 5>> hemisphere_mean(
    const std::array<ChannelStats, kNumChannels>& stats,
    const std::array<bool, kNumChannels>& valid) {
    std::array<double, 5> left{}, right{};
    int nl = 0, nr = 0;
    for (int c = 0; c < kNumChannels; ++c) {
        if (!valid[c]) continue;
        auto a = stats[c].as_array();
        if (c < 8) {
            for (int k = 0; k < 5; ++k) left[k] += a[k];
            ++nl;
        } else {
            for (int k = 0; k < 5; ++k) right[k] += a[k];
            ++nr;
        }
    }
    if (nl == 0) throw DataError("HemisphereEmpty: no valid left-hemisphere channel");
    if (nr == 0) throw DataError("HemisphereEmpty: no valid right-hemisphere channel");
    for (int k = 0; k < 5; ++k) {
        left[k] /= nl;
        right[k] /= nr;
    }
    return {left, right};
}

CondFeatures cond_features(const TaskEpoch& epoch, double horizon_s) {
    TaskEpoch ep = truncate_epoch(epoch, horizon_s);
    std::array<ChannelStats, kNumChannels> hb_stats{}, hbo2_stats{};
    for (int c = 0; c < kNumChannels; ++c) {
        if (!ep.valid[c]) continue;
        hb_stats[c] = channel_stats(ep.hb[c]);
        hbo2_stats[c] = channel_stats(ep.hbo2[c]);
    }
    auto [hb_l, hb_r] = hemisphere_mean(hb_stats, ep.valid);
    auto [hbo2_l, hbo2_r] = hemisphere_mean(hbo2_stats, ep.valid);
    CondFeatures out;
    out.subject_id = ep.subject_id;
    out.task = ep.task;
    for (int k = 0; k < 5; ++k) {
        out.values[k] = hb_l[k];
        out.values[5 + k] = hb_r[k];
        out.values[10 + k] = hbo2_l[k];
        out.values[15 + k] = hbo2_r[k];
    }
    return out;
}

std::pair<EncodedFeatures, EncodedFeatures> encode_pair(const CondFeatures& stw,
                                                        const CondFeatures& dtw) {
    if (stw.subject_id != dtw.subject_id)
        throw DataError("encode_pair: subject mismatch (" + stw.subject_id + " vs " +
                        dtw.subject_id + ")");
    if (stw.task != Task::STW || dtw.task != Task::DTW)
        throw DataError("encode_pair: arguments must be the STW then the DTW condition");
    EncodedFeatures es, ed;
    es.subject_id = ed.subject_id = stw.subject_id;
    es.task = Task::STW;
    ed.task = Task::DTW;
    for (int i = 0; i < kNumCondFeatures; ++i) {
        if (stw.values[i] > dtw.values[i]) {
            es.bits[i] = 1;
            ed.bits[i] = 0;
        } else if (stw.values[i] < dtw.values[i]) {
            es.bits[i] = 0;
            ed.bits[i] = 1;
        } else {
            es.bits[i] = 0;
            ed.bits[i] = 0;
        }
    }
    return {es, ed};
}

std::pair<std::vector<double>, Task> assemble_vector(const EncodedFeatures& enc,
                                                     const SubjectMeta& subject,
                                                     const FeatureMask& mask) {
    if (mask_dim(mask) == 0) throw ConfigError("feature mask selects no positions");
    std::array<double, kNumFeatures> fullv{};
    fullv[0] = subject.gender == Gender::Female ? 1.0 : 0.0;
    fullv[1] = static_cast<double>(subject.rbans);
    for (int i = 0; i < kNumCondFeatures; ++i) fullv[2 + i] = enc.bits[i];
    std::vector<double> out;
    out.reserve(mask_dim(mask));
    for (int i = 0; i < kNumFeatures; ++i)
        if (mask[i]) out.push_back(fullv[i]);
    return {std::move(out), enc.task};
}

std::vector<double> select_features(const FeatureRow& row, const FeatureMask& mask) {
    std::vector<double> out;
    out.reserve(mask_dim(mask));
    for (int i = 0; i < kNumFeatures; ++i)
        if (mask[i]) out.push_back(row.values[i]);
    return out;
}

FeatureExtraction extract_features(const std::vector<SubjectMeta>& subjects,
                                   const std::vector<SubjectEpochs>& epochs,
                                   double horizon_s) {
    std::map<std::string, const SubjectEpochs*> by_id;
    for (const auto& e : epochs) by_id[e.subject_id] = &e;

    struct SubjectResult {
        bool ok = false;
        FeatureRow stw, dtw;
        Exclusion excl;
    };
    std::vector<SubjectResult> results(subjects.size());
    parallel_for(subjects.size(), [&](size_t i) {
        const SubjectMeta& meta = subjects[i];
        SubjectResult& r = results[i];
        try {
            auto it = by_id.find(meta.subject_id);
            if (it == by_id.end()) throw DataError("no epochs for subject");
            const TaskEpoch* stw_ep = nullptr;
            const TaskEpoch* dtw_ep = nullptr;
            for (const auto& ep : it->second->epochs) {
                if (ep.task == Task::STW) stw_ep = &ep;
                if (ep.task == Task::DTW) dtw_ep = &ep;
            }
            if (!stw_ep) throw DataError("missing STW epoch");
            if (!dtw_ep) throw DataError("missing DTW epoch");
            auto [es, ed] = encode_pair(cond_features(*stw_ep, horizon_s),
                                        cond_features(*dtw_ep, horizon_s));
            auto fill = [&](const EncodedFeatures& enc, FeatureRow& row) {
                auto [v, task] = assemble_vector(enc, meta, full_mask());
                row.subject_id = meta.subject_id;
                row.task = task;
                std::copy(v.begin(), v.end(), row.values.begin());
            };
            fill(es, r.stw);
            fill(ed, r.dtw);
            r.ok = true;
        } catch (const std::exception& ex) {
            r.excl = {meta.subject_id, "features", ex.what()};
        }
    });

    FeatureExtraction out;
    for (const auto& r : results) {
        if (r.ok) {
            out.rows.push_back(r.stw);
            out.rows.push_back(r.dtw);
        } else {
            out.exclusions.push_back(r.excl);
        }
    }
    if (out.rows.empty())
        throw DataError("EmptyCohort: every subject was excluded during feature extraction");
    return out;
}

static const char* kFeatureHeader =
    "subject_id,task,g,s,"
    "hb_l_max,hb_l_min,hb_l_mean,hb_l_skew,hb_l_kurt,"
    "hb_r_max,hb_r_min,hb_r_mean,hb_r_skew,hb_r_kurt,"
    "hbo2_l_max,hbo2_l_min,hbo2_l_mean,hbo2_l_skew,hbo2_l_kurt,"
    "hbo2_r_max,hbo2_r_min,hbo2_r_mean,hbo2_r_skew,hbo2_r_kurt";

std::string features_to_csv(const std::vector<FeatureRow>& rows) {
    std::string out = kFeatureHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += r.subject_id;
        out += ',';
        out += to_string(r.task);
        for (int i = 0; i < kNumFeatures; ++i) {
            out += ',';
            // everything in the vector is integral by construction
            out += fmt_int(static_cast<long long>(std::llround(r.values[i])));
        }
        out += '\n';
    }
    return out;
}

std::vector<FeatureRow> features_from_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty features file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kFeatureHeader) throw DataError(origin + ": bad features header");
    std::vector<FeatureRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line);
        std::string ctx = origin + ":" + std::to_string(lineno);
        if (f.size() != 2 + kNumFeatures)
            throw DataError(ctx + ": expected " + std::to_string(2 + kNumFeatures) + " fields");
        FeatureRow r;
        r.subject_id = f[0];
        r.task = task_from_string(f[1]);
        if (r.task == Task::Alpha) throw DataError(ctx + ": ALPHA rows are not classifiable");
        for (int i = 0; i < kNumFeatures; ++i) r.values[i] = parse_double(f[2 + i], ctx);
        for (int i = 2; i < kNumFeatures; ++i)
            if (r.values[i] != 0.0 && r.values[i] != 1.0)
                throw DataError(ctx + ": encoded feature columns must be 0 or 1");
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_features_csv(const std::filesystem::path& file, const std::vector<FeatureRow>& rows) {
    write_text_file(file, features_to_csv(rows));
}

std::vector<FeatureRow> load_features_csv(const std::filesystem::path& file) {
    return features_from_csv(read_text_file(file), file.string());
}

} // namespace gaitnirs
