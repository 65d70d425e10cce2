#pragma once
#include "gaitnirs/core.hpp"
#include "gaitnirs/features.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gaitnirs {

enum class AlgoKind : uint8_t { LR = 0, DT = 1, RF = 2, SVM = 3, KNN = 4, MLP = 5 };

// Parsed from CLI tokens: lr | dt | rf:5 | rf:10 | rf:25 | svm | knn:1 | knn:5
// | knn:10 | mlp:10 | mlp:10,10 | mlp:50. Hyperparameters are fixed defaults,
// exposed so tests can pin them.
struct AlgorithmSpec {
    AlgoKind kind = AlgoKind::LR;
    int rf_trees = 5;
    int knn_k = 5;
    std::vector<int> mlp_layers{10};

    double lr_rate = 0.1;
    int lr_epochs = 5000;
    double lr_tol = 1e-8;  // on the full-gradient norm
    double lr_l2 = 1e-4;   // weights only, not bias
    double svm_rate = 0.1;
    int svm_epochs = 5000;
    double svm_l2 = 1e-3;
    double mlp_rate = 0.01;
    int mlp_epochs = 500;
    int mlp_batch = 32;
    int min_samples_split = 2;
    bool rf_bootstrap = true;         // disable only for the single-tree oracle
    bool rf_feature_subsample = true;

    static AlgorithmSpec parse(const std::string& token);
    std::string id() const; // "LR", "RF_5", "kNN_5", "MLP_10-10", ...
};

// Labels: 0 = STW, 1 = DTW. Rows keep their source subject for subject-mode
// splitting.
struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    std::vector<std::string> subject_ids;

    size_t size() const { return x.size(); }
    size_t dim() const { return x.empty() ? 0 : x[0].size(); }
};

Dataset make_dataset(const std::vector<FeatureRow>& rows, const FeatureMask& mask);

struct SplitInfo {
    uint64_t seed = 0;
    bool subject_mode = false; // false = row shuffling
    double test_fraction = 0.2;
};

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction, uint64_t seed,
                                          bool subject_mode);

struct TreeNode {
    bool leaf = false;
    int label = 0;       // leaves only
    int feature = -1;    // internal nodes: x[feature] <= threshold goes left
    double threshold = 0;
    int left = -1, right = -1;
};

struct MlpLayer {
    int in = 0, out = 0;
    std::vector<double> w; // row-major out x in
    std::vector<double> b;
};

struct TrainedModel {
    AlgorithmSpec spec;
    uint32_t mask_bits = 0;   // feature mask the dataset columns were selected with
    SplitInfo split;
    double train_time_ms = 0;
    int dim = 0;

    // linear kinds (raw-scale weights; standardization is folded back in)
    std::vector<double> weights;
    double bias = 0;
    // tree kinds
    std::vector<std::vector<TreeNode>> trees;
    // kNN
    std::vector<std::vector<double>> knn_x;
    std::vector<int> knn_y;
    // MLP (first layer operates on raw inputs)
    std::vector<MlpLayer> layers;
};

TrainedModel train(const AlgorithmSpec& spec, const Dataset& train_set, uint64_t seed);

int predict(const TrainedModel& model, const std::vector<double>& x);
std::vector<int> predict_batch(const TrainedModel& model,
                               const std::vector<std::vector<double>>& xs);

struct EvalReport {
    std::string algorithm;
    double accuracy = 0;
    double train_time_ms = 0;
    double test_time_ms_per_1000 = 0;
};

// Accuracy over the test set plus the 1000-sample timing protocol: the test
// rows are cycled to 1000 queries, timed timing_reps times, median reported.
EvalReport evaluate(const TrainedModel& model, const Dataset& test, int timing_reps = 5);

// Max relative error between analytic gradients and central finite
// differences (step 1e-5) over all parameters.
double gradient_check_lr(const Dataset& sample, double l2);
double gradient_check_mlp(const Dataset& sample, const std::vector<int>& hidden, uint64_t seed);

void save_model(const std::filesystem::path& file, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& file);

} // namespace gaitnirs
