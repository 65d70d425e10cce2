#include "gaitnirs/core.hpp"
#include "gaitnirs/errors.hpp"
#include "gaitnirs/textio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace gaitnirs {

const char* to_string(Task t) {
    switch (t) {
        case Task::STW: return "STW";
        case Task::Alpha: return "ALPHA";
        case Task::DTW: return "DTW";
    }
    return "?";
}

Task task_from_string(const std::string& s) {
    if (s == "STW") return Task::STW;
    if (s == "ALPHA") return Task::Alpha;
    if (s == "DTW") return Task::DTW;
    throw DataError("unknown task '" + s + "'");
}

size_t TaskEpoch::n_samples() const {
    for (int c = 0; c < kNumChannels; ++c)
        if (valid[c]) return hbo2[c].size();
    return 0;
}

std::vector<ValidationIssue> ValidationReport::failures() const {
    std::vector<ValidationIssue> out;
    for (const auto& i : issues)
        if (i.fail) out.push_back(i);
    return out;
}

std::vector<ValidationIssue> ValidationReport::warnings() const {
    std::vector<ValidationIssue> out;
    for (const auto& i : issues)
        if (!i.fail) out.push_back(i);
    return out;
}

ValidationReport validate_cohort(const std::vector<SubjectMeta>& subjects,
                                 const std::vector<RawRecording>& recordings) {
    ValidationReport report;
    auto fail = [&](const std::string& id, const std::string& why) {
        report.issues.push_back({id, true, why});
        report.passed = false;
    };
    auto warn = [&](const std::string& id, const std::string& why) {
        report.issues.push_back({id, false, why});
    };

    std::set<std::string> seen;
    for (const auto& s : subjects) {
        if (!seen.insert(s.subject_id).second) fail(s.subject_id, "duplicate subject_id");
        if (s.rbans < 40 || s.rbans > 160) fail(s.subject_id, "rbans outside [40,160]");
        if (s.age < 0) fail(s.subject_id, "negative age");
        else if (s.age < 65) warn(s.subject_id, "age below 65 (cohort definition)");
    }

    std::map<std::string, int> rec_count;
    std::set<std::string> rec_dupes;
    for (const auto& r : recordings) {
        if (++rec_count[r.subject_id] > 1) rec_dupes.insert(r.subject_id);
    }
    for (const auto& id : rec_dupes) fail(id, "duplicate recording for subject");

    for (const auto& s : subjects) {
        auto it = std::find_if(recordings.begin(), recordings.end(),
                               [&](const RawRecording& r) { return r.subject_id == s.subject_id; });
        if (it == recordings.end()) {
            fail(s.subject_id, "missing recording");
            continue;
        }
        const RawRecording& rec = *it;
        int n_stw = 0, n_dtw = 0;
        for (const auto& ev : rec.events) {
            if (ev.task == Task::STW) ++n_stw;
            if (ev.task == Task::DTW) ++n_dtw;
            if (!(ev.baseline_start < ev.task_start && ev.task_start < ev.task_end))
                fail(s.subject_id, "marker times out of order");
            double dur_s = static_cast<double>(rec.n_samples()) / rec.sampling_rate;
            if (ev.task_end > dur_s + 1e-9) fail(s.subject_id, "marker beyond recording end");
        }
        if (n_stw != 1) fail(s.subject_id, n_stw == 0 ? "missing STW" : "multiple STW markers");
        if (n_dtw != 1) fail(s.subject_id, n_dtw == 0 ? "missing DTW" : "multiple DTW markers");
    }
    for (const auto& r : recordings) {
        bool known = std::any_of(subjects.begin(), subjects.end(),
                                 [&](const SubjectMeta& s) { return s.subject_id == r.subject_id; });
        if (!known) fail(r.subject_id, "recording without subject entry");
    }
    return report;
}

// --- subjects.csv ---

std::string subjects_to_csv(const std::vector<SubjectMeta>& subjects) {
    std::string out = "subject_id,age,gender,rbans\n";
    for (const auto& s : subjects) {
        out += s.subject_id;
        out += ',';
        out += fmt_double(s.age);
        out += ',';
        out += (s.gender == Gender::Female ? 'F' : 'M');
        out += ',';
        out += fmt_int(s.rbans);
        out += '\n';
    }
    return out;
}

std::vector<SubjectMeta> subjects_from_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty subjects file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "subject_id,age,gender,rbans")
        throw DataError(origin + ": bad subjects header '" + line + "'");
    std::vector<SubjectMeta> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line);
        std::string ctx = origin + ":" + std::to_string(lineno);
        if (f.size() != 4) throw DataError(ctx + ": expected 4 fields");
        SubjectMeta s;
        s.subject_id = f[0];
        if (s.subject_id.empty()) throw DataError(ctx + ": empty subject_id");
        s.age = parse_double(f[1], ctx);
        if (f[2] == "M") s.gender = Gender::Male;
        else if (f[2] == "F") s.gender = Gender::Female;
        else throw DataError(ctx + ": gender must be M or F");
        long long rb = parse_int(f[3], ctx);
        if (rb < 40 || rb > 160) throw DataError(ctx + ": rbans outside [40,160]");
        s.rbans = static_cast<int>(rb);
        out.push_back(std::move(s));
    }
    return out;
}

void write_subjects_csv(const std::filesystem::path& file, const std::vector<SubjectMeta>& subjects) {
    write_text_file(file, subjects_to_csv(subjects));
}

std::vector<SubjectMeta> load_subjects_csv(const std::filesystem::path& file) {
    return subjects_from_csv(read_text_file(file), file.string());
}

// --- <id>_raw.csv: t_s,channel,i730,i850 sorted by (t_s, channel) on a 0.5 s grid ---

std::string raw_to_csv(const RawRecording& rec) {
    std::string out = "t_s,channel,i730,i850\n";
    size_t n = rec.n_samples();
    for (size_t t = 0; t < n; ++t) {
        std::string ts = fmt_double(static_cast<double>(t) / rec.sampling_rate);
        for (int c = 0; c < kNumChannels; ++c) {
            out += ts;
            out += ',';
            out += fmt_int(c + 1);
            out += ',';
            out += fmt_double(rec.channels[c].i730[t]);
            out += ',';
            out += fmt_double(rec.channels[c].i850[t]);
            out += '\n';
        }
    }
    return out;
}

RawRecording raw_from_csv(const std::string& text, const std::string& subject_id,
                          const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty raw file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t_s,channel,i730,i850")
        throw DataError(origin + ": bad raw header '" + line + "'");
    RawRecording rec;
    rec.subject_id = subject_id;
    int lineno = 1;
    long long t_idx = -1;
    int chan_expect = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line);
        std::string ctx = origin + ":" + std::to_string(lineno);
        if (f.size() != 4) throw DataError(ctx + ": expected 4 fields");
        double t_s = parse_double(f[0], ctx);
        long long chan = parse_int(f[1], ctx);
        if (chan < 1 || chan > kNumChannels) throw DataError(ctx + ": channel outside 1..16");
        if (chan == 1) {
            ++t_idx;
            chan_expect = 1;
            double expect_t = static_cast<double>(t_idx) * 0.5;
            if (std::abs(t_s - expect_t) > 1e-9)
                throw DataError(ctx + ": t_s off the 0.5 s grid (got " + f[0] + ", expected " +
                                fmt_double(expect_t) + "); sampling rate must be 2 Hz");
        }
        if (chan != chan_expect)
            throw DataError(ctx + ": rows must be sorted by (t_s, channel); expected channel " +
                            std::to_string(chan_expect));
        ++chan_expect;
        rec.channels[chan - 1].i730.push_back(parse_double(f[2], ctx));
        rec.channels[chan - 1].i850.push_back(parse_double(f[3], ctx));
    }
    if (t_idx < 0) throw DataError(origin + ": no samples");
    if (chan_expect != kNumChannels + 1)
        throw DataError(origin + ": last sample is missing channels");
    return rec;
}

// --- <id>_events.csv ---

std::string events_to_csv(const std::vector<EventMarker>& events) {
    std::string out = "task,baseline_start_s,task_start_s,task_end_s\n";
    for (const auto& ev : events) {
        out += to_string(ev.task);
        out += ',';
        out += fmt_double(ev.baseline_start);
        out += ',';
        out += fmt_double(ev.task_start);
        out += ',';
        out += fmt_double(ev.task_end);
        out += '\n';
    }
    return out;
}

std::vector<EventMarker> events_from_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty events file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "task,baseline_start_s,task_start_s,task_end_s")
        throw DataError(origin + ": bad events header '" + line + "'");
    std::vector<EventMarker> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line);
        std::string ctx = origin + ":" + std::to_string(lineno);
        if (f.size() != 4) throw DataError(ctx + ": expected 4 fields");
        EventMarker ev;
        ev.task = task_from_string(f[0]);
        ev.baseline_start = parse_double(f[1], ctx);
        ev.task_start = parse_double(f[2], ctx);
        ev.task_end = parse_double(f[3], ctx);
        if (!(ev.baseline_start < ev.task_start && ev.task_start < ev.task_end))
            throw DataError(ctx + ": marker times out of order");
        out.push_back(ev);
    }
    return out;
}

// --- <id>_epochs.csv ---

static const char* chromo_name(bool is_hbo2) { return is_hbo2 ? "hbo2" : "hb"; }

std::string epochs_to_csv(const std::vector<TaskEpoch>& epochs) {
    std::string out = "task,channel,chromophore,t_idx,value_um\n";
    for (const auto& ep : epochs) {
        for (int c = 0; c < kNumChannels; ++c) {
            if (!ep.valid[c]) continue;
            for (int h = 0; h < 2; ++h) {
                const Series& s = h == 0 ? ep.hbo2[c] : ep.hb[c];
                for (size_t t = 0; t < s.size(); ++t) {
                    out += to_string(ep.task);
                    out += ',';
                    out += fmt_int(c + 1);
                    out += ',';
                    out += chromo_name(h == 0);
                    out += ',';
                    out += fmt_int(static_cast<long long>(t));
                    out += ',';
                    out += fmt_double(s[t]);
                    out += '\n';
                }
            }
        }
    }
    return out;
}

std::vector<TaskEpoch> epochs_from_csv(const std::string& text, const std::string& subject_id,
                                       const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty epochs file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "task,channel,chromophore,t_idx,value_um")
        throw DataError(origin + ": bad epochs header '" + line + "'");
    std::map<Task, TaskEpoch> by_task;
    std::vector<Task> order;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line);
        std::string ctx = origin + ":" + std::to_string(lineno);
        if (f.size() != 5) throw DataError(ctx + ": expected 5 fields");
        Task task = task_from_string(f[0]);
        long long chan = parse_int(f[1], ctx);
        if (chan < 1 || chan > kNumChannels) throw DataError(ctx + ": channel outside 1..16");
        long long t_idx = parse_int(f[3], ctx);
        double v = parse_double(f[4], ctx);
        if (!by_task.count(task)) {
            order.push_back(task);
            by_task[task].subject_id = subject_id;
            by_task[task].task = task;
        }
        TaskEpoch& ep = by_task[task];
        Series* s;
        if (f[2] == "hbo2") s = &ep.hbo2[chan - 1];
        else if (f[2] == "hb") s = &ep.hb[chan - 1];
        else throw DataError(ctx + ": unknown chromophore '" + f[2] + "'");
        if (static_cast<long long>(s->size()) != t_idx)
            throw DataError(ctx + ": t_idx not consecutive within (task, channel, chromophore)");
        s->push_back(v);
        ep.valid[chan - 1] = true;
    }
    std::vector<TaskEpoch> out;
    for (Task t : order) {
        TaskEpoch& ep = by_task[t];
        for (int c = 0; c < kNumChannels; ++c)
            if (ep.valid[c] && ep.hbo2[c].size() != ep.hb[c].size())
                throw DataError(origin + ": channel " + std::to_string(c + 1) +
                                " has mismatched hbo2/hb lengths");
        out.push_back(std::move(ep));
    }
    return out;
}

// --- exclusions.csv ---

std::string exclusions_to_csv(const std::vector<Exclusion>& rows) {
    std::string out = "subject_id,stage,reason\n";
    for (const auto& r : rows) {
        // reasons may contain commas; CSV-quote that one field
        std::string reason = r.reason;
        bool quote = reason.find_first_of(",\"") != std::string::npos;
        if (quote) {
            std::string q = "\"";
            for (char ch : reason) {
                if (ch == '"') q += "\"\"";
                else q += ch;
            }
            q += '"';
            reason = q;
        }
        out += r.subject_id + "," + r.stage + "," + reason + "\n";
    }
    return out;
}

std::vector<Exclusion> exclusions_from_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty exclusions file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "subject_id,stage,reason")
        throw DataError(origin + ": bad exclusions header '" + line + "'");
    std::vector<Exclusion> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string ctx = origin + ":" + std::to_string(lineno);
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw DataError(ctx + ": expected 3 fields");
        Exclusion e;
        e.subject_id = line.substr(0, c1);
        e.stage = line.substr(c1 + 1, c2 - c1 - 1);
        std::string reason = line.substr(c2 + 1);
        if (reason.size() >= 2 && reason.front() == '"' && reason.back() == '"') {
            std::string unq;
            for (size_t i = 1; i + 1 < reason.size(); ++i) {
                if (reason[i] == '"' && i + 2 < reason.size() && reason[i + 1] == '"') ++i;
                unq += reason[i];
            }
            reason = unq;
        }
        e.reason = reason;
        out.push_back(e);
    }
    return out;
}

// --- cohort directory ---

Cohort load_cohort(const std::filesystem::path& dir) {
    Cohort cohort;
    cohort.subjects = load_subjects_csv(dir / "subjects.csv");
    cohort.recordings.reserve(cohort.subjects.size());
    for (const auto& s : cohort.subjects) {
        auto raw_path = dir / (s.subject_id + "_raw.csv");
        auto ev_path = dir / (s.subject_id + "_events.csv");
        RawRecording rec = raw_from_csv(read_text_file(raw_path), s.subject_id, raw_path.string());
        rec.events = events_from_csv(read_text_file(ev_path), ev_path.string());
        cohort.recordings.push_back(std::move(rec));
    }
    return cohort;
}

void write_cohort(const std::filesystem::path& dir, const Cohort& cohort) {
    std::filesystem::create_directories(dir);
    write_subjects_csv(dir / "subjects.csv", cohort.subjects);
    for (const auto& rec : cohort.recordings) {
        write_text_file(dir / (rec.subject_id + "_raw.csv"), raw_to_csv(rec));
        write_text_file(dir / (rec.subject_id + "_events.csv"), events_to_csv(rec.events));
    }
}

} // namespace gaitnirs
