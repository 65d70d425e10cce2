#pragma once
#include "gaitnirs/core.hpp"

#include <array>
#include <cstdint>
#include <utility>

namespace gaitnirs {

constexpr int kNumCondFeatures = 20; // 2 hemispheres x 5 statistics x 2 chromophores
constexpr int kNumFeatures = 22;     // gender, cognitive score + the 20 encoded features

// Feature vector layout (fixed): 0 gender (female = 1), 1 cognitive score,
// 2-6 Hb left (max,min,mean,skew,kurt), 7-11 Hb right, 12-16 HbO2 left,
// 17-21 HbO2 right. CondFeatures holds positions 2..21 in the same order.
struct ChannelStats {
    double max = 0, min = 0, mean = 0;
    double skewness = 0;
    double kurtosis = 0; // excess convention: Gaussian -> 0
    bool degenerate = false; // zero variance; skew/kurt forced to 0

    std::array<double, 5> as_array() const { return {max, min, mean, skewness, kurtosis}; }
};

struct CondFeatures {
    std::string subject_id;
    Task task = Task::STW;
    std::array<double, kNumCondFeatures> values{};
};

struct EncodedFeatures {
    std::string subject_id;
    Task task = Task::STW;
    std::array<uint8_t, kNumCondFeatures> bits{};
};

using FeatureMask = std::array<bool, kNumFeatures>;

FeatureMask full_mask();
FeatureMask mask_from_indices(const std::vector<int>& indices);
int mask_dim(const FeatureMask& mask);
uint32_t mask_to_bits(const FeatureMask& mask);
FeatureMask mask_from_bits(uint32_t bits);

// Keeps the first min(n, horizon * 2 Hz) samples of every valid channel.
TaskEpoch truncate_epoch(const TaskEpoch& epoch, double horizon_s = 60.0);

// Population-moment statistics; requires n >= 4.
ChannelStats channel_stats(const Series& samples);

// Statistic-wise mean over valid channels, left = ch 1-8, right = ch 9-16.
std::pair<std::array<double, 5>, std::array<double, 5>> hemisphere_mean(
    const std::array<ChannelStats, kNumChannels>& stats,
    const std::array<bool, kNumChannels>& valid);

// Truncate + per-channel stats + hemisphere averaging for one task epoch.
CondFeatures cond_features(const TaskEpoch& epoch, double horizon_s = 60.0);

// Per index: higher condition gets bit 1, lower gets 0; ties give (0,0).
std::pair<EncodedFeatures, EncodedFeatures> encode_pair(const CondFeatures& stw,
                                                        const CondFeatures& dtw);

// Ordered vector of the mask-selected positions; label = the encoded task.
std::pair<std::vector<double>, Task> assemble_vector(const EncodedFeatures& enc,
                                                     const SubjectMeta& subject,
                                                     const FeatureMask& mask);

// One features.csv row: the full 22-position vector plus identity columns.
struct FeatureRow {
    std::string subject_id;
    Task task = Task::STW;
    std::array<double, kNumFeatures> values{};
};

std::vector<double> select_features(const FeatureRow& row, const FeatureMask& mask);

struct FeatureExtraction {
    std::vector<FeatureRow> rows; // two rows (STW, DTW) per surviving subject
    std::vector<Exclusion> exclusions;
};

// Runs cond_features + encode_pair for every subject that has both an STW and
// a DTW epoch; subjects that fail (short epochs, empty hemisphere, missing
// condition) are excluded and recorded. All subjects excluded -> error.
struct SubjectEpochs {
    std::string subject_id;
    std::vector<TaskEpoch> epochs;
};

FeatureExtraction extract_features(const std::vector<SubjectMeta>& subjects,
                                   const std::vector<SubjectEpochs>& epochs,
                                   double horizon_s = 60.0);

std::string features_to_csv(const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> features_from_csv(const std::string& text, const std::string& origin);
void write_features_csv(const std::filesystem::path& file, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> load_features_csv(const std::filesystem::path& file);

} // namespace gaitnirs
