#pragma once
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gaitnirs {

using Series = std::vector<double>;

constexpr int kNumChannels = 16;
constexpr double kSamplingRateHz = 2.0;
constexpr int kBaselineSamples = 20; // 10 s at 2 Hz

enum class Task { STW, Alpha, DTW };
enum class Gender { Male, Female };

const char* to_string(Task t);
Task task_from_string(const std::string& s);

struct SubjectMeta {
    std::string subject_id;
    double age = 0;
    Gender gender = Gender::Male;
    int rbans = 0;

    bool operator==(const SubjectMeta&) const = default;
};

struct EventMarker {
    Task task = Task::STW;
    double baseline_start = 0; // seconds
    double task_start = 0;
    double task_end = 0;

    bool operator==(const EventMarker&) const = default;
};

struct ChannelRaw {
    Series i730;
    Series i850;

    bool operator==(const ChannelRaw&) const = default;
};

// 16-channel two-wavelength intensity recording at 2 Hz. Channels are indexed
// 1..16 externally (array slot = channel - 1); 1-8 left hemisphere, 9-16 right.
struct RawRecording {
    std::string subject_id;
    double sampling_rate = kSamplingRateHz;
    std::array<ChannelRaw, kNumChannels> channels;
    std::vector<EventMarker> events;

    size_t n_samples() const { return channels[0].i730.size(); }
    bool operator==(const RawRecording&) const = default;
};

struct HemoSeries {
    std::string subject_id;
    std::array<Series, kNumChannels> hbo2; // µM
    std::array<Series, kNumChannels> hb;   // µM
    std::array<bool, kNumChannels> valid{};
};

struct TaskEpoch {
    std::string subject_id;
    Task task = Task::STW;
    std::array<Series, kNumChannels> hbo2;
    std::array<Series, kNumChannels> hb;
    std::array<bool, kNumChannels> valid{};

    size_t n_samples() const;
};

struct ValidationIssue {
    std::string subject_id;
    bool fail = false; // false -> warning
    std::string reason;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool passed = true;

    std::vector<ValidationIssue> failures() const;
    std::vector<ValidationIssue> warnings() const;
};

// A cohort passes iff subject ids are unique and every subject has exactly one
// recording containing one STW and one DTW marker (with baseline windows).
// Age < 65 yields a warning only.
ValidationReport validate_cohort(const std::vector<SubjectMeta>& subjects,
                                 const std::vector<RawRecording>& recordings);

// --- external file formats ---

std::string subjects_to_csv(const std::vector<SubjectMeta>& subjects);
std::vector<SubjectMeta> subjects_from_csv(const std::string& text, const std::string& origin);
void write_subjects_csv(const std::filesystem::path& file, const std::vector<SubjectMeta>& subjects);
std::vector<SubjectMeta> load_subjects_csv(const std::filesystem::path& file);

std::string raw_to_csv(const RawRecording& rec);
RawRecording raw_from_csv(const std::string& text, const std::string& subject_id, const std::string& origin);

std::string events_to_csv(const std::vector<EventMarker>& events);
std::vector<EventMarker> events_from_csv(const std::string& text, const std::string& origin);

// Epoch files hold one subject's task epochs as long-format rows; channels
// absent from the file are marked invalid on load.
std::string epochs_to_csv(const std::vector<TaskEpoch>& epochs);
std::vector<TaskEpoch> epochs_from_csv(const std::string& text, const std::string& subject_id,
                                       const std::string& origin);

struct Exclusion {
    std::string subject_id;
    std::string stage;
    std::string reason;
};

std::string exclusions_to_csv(const std::vector<Exclusion>& rows);
std::vector<Exclusion> exclusions_from_csv(const std::string& text, const std::string& origin);

struct Cohort {
    std::vector<SubjectMeta> subjects;
    std::vector<RawRecording> recordings;
};

// Reads subjects.csv plus <id>_raw.csv / <id>_events.csv for each subject.
Cohort load_cohort(const std::filesystem::path& dir);
void write_cohort(const std::filesystem::path& dir, const Cohort& cohort);

} // namespace gaitnirs
