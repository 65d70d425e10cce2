#include "gaitnirs/classify.hpp"
#include "gaitnirs/errors.hpp"
#include "gaitnirs/random.hpp"
#include "gaitnirs/textio.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>

namespace gaitnirs {

// --- algorithm spec ---

AlgorithmSpec AlgorithmSpec::parse(const std::string& token) {
    std::string t;
    for (char c : token) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    AlgorithmSpec spec;
    auto colon = t.find(':');
    std::string head = t.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : t.substr(colon + 1);
    auto need_arg = [&](const char* what) {
        if (arg.empty()) throw ConfigError("algorithm '" + token + "' needs " + what);
    };
    auto no_arg = [&] {
        if (colon != std::string::npos)
            throw ConfigError("algorithm '" + head + "' takes no parameter");
    };
    if (head == "lr") {
        no_arg();
        spec.kind = AlgoKind::LR;
    } else if (head == "dt") {
        no_arg();
        spec.kind = AlgoKind::DT;
    } else if (head == "svm") {
        no_arg();
        spec.kind = AlgoKind::SVM;
    } else if (head == "rf") {
        need_arg("a tree count, e.g. rf:10");
        spec.kind = AlgoKind::RF;
        spec.rf_trees = static_cast<int>(parse_int(arg, "algorithm '" + token + "'"));
        if (spec.rf_trees < 1) throw ConfigError("rf tree count must be >= 1");
    } else if (head == "knn") {
        need_arg("a neighbor count, e.g. knn:5");
        spec.kind = AlgoKind::KNN;
        spec.knn_k = static_cast<int>(parse_int(arg, "algorithm '" + token + "'"));
        if (spec.knn_k < 1) throw ConfigError("knn k must be >= 1");
    } else if (head == "mlp") {
        need_arg("hidden sizes, e.g. mlp:10,10");
        spec.kind = AlgoKind::MLP;
        spec.mlp_layers.clear();
        for (const auto& part : split_csv(arg)) {
            int h = static_cast<int>(parse_int(part, "algorithm '" + token + "'"));
            if (h < 1) throw ConfigError("mlp hidden sizes must be >= 1");
            spec.mlp_layers.push_back(h);
        }
    } else {
        throw ConfigError("unknown algorithm '" + token +
                          "' (expected lr|dt|rf:N|svm|knn:K|mlp:H[,H...])");
    }
    return spec;
}

std::string AlgorithmSpec::id() const {
    switch (kind) {
        case AlgoKind::LR: return "LR";
        case AlgoKind::DT: return "DT";
        case AlgoKind::SVM: return "SVM";
        case AlgoKind::RF: return "RF_" + std::to_string(rf_trees);
        case AlgoKind::KNN: return "kNN_" + std::to_string(knn_k);
        case AlgoKind::MLP: {
            std::string s = "MLP_";
            for (size_t i = 0; i < mlp_layers.size(); ++i) {
                if (i) s += '-';
                s += std::to_string(mlp_layers[i]);
            }
            return s;
        }
    }
    return "?";
}

// --- dataset plumbing ---

Dataset make_dataset(const std::vector<FeatureRow>& rows, const FeatureMask& mask) {
    if (mask_dim(mask) == 0) throw ConfigError("feature mask selects no positions");
    Dataset ds;
    ds.x.reserve(rows.size());
    ds.y.reserve(rows.size());
    ds.subject_ids.reserve(rows.size());
    for (const auto& r : rows) {
        ds.x.push_back(select_features(r, mask));
        ds.y.push_back(r.task == Task::DTW ? 1 : 0);
        ds.subject_ids.push_back(r.subject_id);
    }
    return ds;
}

static Dataset take_rows(const Dataset& ds, const std::vector<size_t>& idx) {
    Dataset out;
    out.x.reserve(idx.size());
    out.y.reserve(idx.size());
    out.subject_ids.reserve(idx.size());
    for (size_t i : idx) {
        out.x.push_back(ds.x[i]);
        out.y.push_back(ds.y[i]);
        out.subject_ids.push_back(ds.subject_ids[i]);
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction, uint64_t seed,
                                          bool subject_mode) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test fraction must be inside (0,1)");
    size_t n = ds.size();
    if (n == 0) throw DataError("cannot split an empty dataset");
    size_t n_test = static_cast<size_t>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::min(std::max<size_t>(n_test, 1), n - 1);
    RandomStream stream(seed);
    std::vector<size_t> test_idx, train_idx;
    if (!subject_mode) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        stream.shuffle(order);
        test_idx.assign(order.begin(), order.begin() + static_cast<long>(n_test));
        train_idx.assign(order.begin() + static_cast<long>(n_test), order.end());
    } else {
        std::vector<std::string> ids;
        for (const auto& s : ds.subject_ids)
            if (std::find(ids.begin(), ids.end(), s) == ids.end()) ids.push_back(s);
        stream.shuffle(ids);
        size_t count = 0;
        std::vector<std::string> test_subjects;
        for (const auto& id : ids) {
            if (count >= n_test) break;
            test_subjects.push_back(id);
            for (size_t i = 0; i < n; ++i)
                if (ds.subject_ids[i] == id) ++count;
        }
        auto is_test = [&](const std::string& id) {
            return std::find(test_subjects.begin(), test_subjects.end(), id) !=
                   test_subjects.end();
        };
        for (size_t i = 0; i < n; ++i)
            (is_test(ds.subject_ids[i]) ? test_idx : train_idx).push_back(i);
    }
    return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

// --- shared numeric helpers ---

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { // log(1 + e^z) without overflow
    return (z > 0 ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

struct Standardizer {
    std::vector<double> mu, sigma;

    static Standardizer fit(const std::vector<std::vector<double>>& x) {
        size_t n = x.size(), d = x[0].size();
        Standardizer s;
        s.mu.assign(d, 0.0);
        s.sigma.assign(d, 0.0);
        for (const auto& row : x)
            for (size_t j = 0; j < d; ++j) s.mu[j] += row[j];
        for (size_t j = 0; j < d; ++j) s.mu[j] /= static_cast<double>(n);
        for (const auto& row : x)
            for (size_t j = 0; j < d; ++j) {
                double dv = row[j] - s.mu[j];
                s.sigma[j] += dv * dv;
            }
        for (size_t j = 0; j < d; ++j) {
            s.sigma[j] = std::sqrt(s.sigma[j] / static_cast<double>(n));
            if (s.sigma[j] == 0.0) s.sigma[j] = 1.0;
        }
        return s;
    }

    std::vector<std::vector<double>> apply(const std::vector<std::vector<double>>& x) const {
        auto out = x;
        for (auto& row : out)
            for (size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mu[j]) / sigma[j];
        return out;
    }
};

void require_both_classes(const Dataset& ds, const char* kind) {
    bool has0 = false, has1 = false;
    for (int y : ds.y) (y ? has1 : has0) = true;
    if (!has0 || !has1)
        throw TrainError(std::string("DegenerateLabels: ") + kind +
                         " training needs both classes present");
}

// --- logistic regression ---

// Mean binary cross-entropy with L2 on the weights (bias unpenalized).
// Returns loss; fills grad_w / grad_b when non-null.
double lr_loss_grad(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                    const std::vector<double>& w, double b, double l2,
                    std::vector<double>* grad_w, double* grad_b) {
    size_t n = x.size(), d = w.size();
    double loss = 0, gb = 0;
    std::vector<double> gw(d, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double z = b;
        for (size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
        loss += softplus(z) - static_cast<double>(y[i]) * z;
        double e = sigmoid(z) - static_cast<double>(y[i]);
        for (size_t j = 0; j < d; ++j) gw[j] += e * x[i][j];
        gb += e;
    }
    loss /= static_cast<double>(n);
    for (size_t j = 0; j < d; ++j) {
        gw[j] = gw[j] / static_cast<double>(n) + l2 * w[j];
        loss += 0.5 * l2 * w[j] * w[j];
    }
    gb /= static_cast<double>(n);
    if (grad_w) *grad_w = std::move(gw);
    if (grad_b) *grad_b = gb;
    return loss;
}

void train_lr(TrainedModel& model, const AlgorithmSpec& spec, const Dataset& ds) {
    require_both_classes(ds, "logistic regression");
    Standardizer st = Standardizer::fit(ds.x);
    auto xs = st.apply(ds.x);
    size_t d = ds.dim();
    std::vector<double> w(d, 0.0), gw;
    double b = 0, gb = 0;
    for (int epoch = 0; epoch < spec.lr_epochs; ++epoch) {
        lr_loss_grad(xs, ds.y, w, b, spec.lr_l2, &gw, &gb);
        double norm2 = gb * gb;
        for (double g : gw) norm2 += g * g;
        if (std::sqrt(norm2) < spec.lr_tol) break;
        for (size_t j = 0; j < d; ++j) w[j] -= spec.lr_rate * gw[j];
        b -= spec.lr_rate * gb;
    }
    // fold the standardization back so predict consumes raw vectors
    model.weights.assign(d, 0.0);
    model.bias = b;
    for (size_t j = 0; j < d; ++j) {
        model.weights[j] = w[j] / st.sigma[j];
        model.bias -= w[j] * st.mu[j] / st.sigma[j];
    }
}

// --- linear SVM (hinge, sub-gradient descent) ---

void train_svm(TrainedModel& model, const AlgorithmSpec& spec, const Dataset& ds) {
    require_both_classes(ds, "SVM");
    Standardizer st = Standardizer::fit(ds.x);
    auto xs = st.apply(ds.x);
    size_t n = ds.size(), d = ds.dim();
    std::vector<double> w(d, 0.0);
    double b = 0;
    for (int epoch = 0; epoch < spec.svm_epochs; ++epoch) {
        std::vector<double> gw(d);
        for (size_t j = 0; j < d; ++j) gw[j] = spec.svm_l2 * w[j];
        double gb = 0;
        for (size_t i = 0; i < n; ++i) {
            double yi = ds.y[i] ? 1.0 : -1.0;
            double z = b;
            for (size_t j = 0; j < d; ++j) z += w[j] * xs[i][j];
            if (yi * z < 1.0) {
                for (size_t j = 0; j < d; ++j) gw[j] -= yi * xs[i][j] / static_cast<double>(n);
                gb -= yi / static_cast<double>(n);
            }
        }
        for (size_t j = 0; j < d; ++j) w[j] -= spec.svm_rate * gw[j];
        b -= spec.svm_rate * gb;
    }
    model.weights.assign(d, 0.0);
    model.bias = b;
    for (size_t j = 0; j < d; ++j) {
        model.weights[j] = w[j] / st.sigma[j];
        model.bias -= w[j] * st.mu[j] / st.sigma[j];
    }
}

// --- CART (shared by DT and RF) ---

double gini_of(size_t n0, size_t n1) {
    double n = static_cast<double>(n0 + n1);
    if (n == 0) return 0.0;
    double p0 = static_cast<double>(n0) / n, p1 = static_cast<double>(n1) / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

struct CartBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<int>& y;
    int min_split;
    int mtry;              // candidate features per split; = dim for plain DT
    RandomStream* stream;  // only when mtry < dim
    std::vector<TreeNode> nodes;

    int leaf(size_t n0, size_t n1) {
        TreeNode nd;
        nd.leaf = true;
        nd.label = n1 > n0 ? 1 : 0; // tie -> STW
        nodes.push_back(nd);
        return static_cast<int>(nodes.size() - 1);
    }

    int build(const std::vector<size_t>& idx) {
        size_t n0 = 0, n1 = 0;
        for (size_t i : idx) (y[i] ? n1 : n0)++;
        if (n0 == 0 || n1 == 0 || idx.size() < static_cast<size_t>(min_split))
            return leaf(n0, n1);

        size_t dim = x[0].size();
        std::vector<size_t> features(dim);
        std::iota(features.begin(), features.end(), 0);
        if (mtry < static_cast<int>(dim)) {
            stream->shuffle(features);
            features.resize(static_cast<size_t>(mtry));
            std::sort(features.begin(), features.end());
        }

        double parent = gini_of(n0, n1);
        double best_gain = -1.0;
        size_t best_f = 0;
        double best_t = 0;
        std::vector<std::pair<double, int>> vals;
        for (size_t f : features) {
            vals.clear();
            for (size_t i : idx) vals.emplace_back(x[i][f], y[i]);
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            size_t l0 = 0, l1 = 0;
            for (size_t k = 0; k + 1 < vals.size(); ++k) {
                (vals[k].second ? l1 : l0)++;
                if (vals[k].first == vals[k + 1].first) continue;
                double t = 0.5 * (vals[k].first + vals[k + 1].first);
                // guard against the midpoint rounding onto either neighbor
                if (!(vals[k].first <= t && t < vals[k + 1].first)) t = vals[k].first;
                size_t nl = l0 + l1, nr = idx.size() - nl;
                double weighted = (static_cast<double>(nl) * gini_of(l0, l1) +
                                   static_cast<double>(nr) * gini_of(n0 - l0, n1 - l1)) /
                                  static_cast<double>(idx.size());
                double gain = parent - weighted;
                if (gain > best_gain) { // ties keep the lowest feature, then threshold
                    best_gain = gain;
                    best_f = f;
                    best_t = t;
                }
            }
        }
        if (best_gain < 0.0) return leaf(n0, n1); // every candidate feature is constant

        std::vector<size_t> left_idx, right_idx;
        for (size_t i : idx) (x[i][best_f] <= best_t ? left_idx : right_idx).push_back(i);
        int me = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{});
        int l = build(left_idx);
        int r = build(right_idx);
        nodes[me].leaf = false;
        nodes[me].feature = static_cast<int>(best_f);
        nodes[me].threshold = best_t;
        nodes[me].left = l;
        nodes[me].right = r;
        return me;
    }
};

std::vector<TreeNode> build_tree(const Dataset& ds, const std::vector<size_t>& idx, int min_split,
                                 int mtry, RandomStream* stream) {
    CartBuilder builder{ds.x, ds.y, min_split, mtry, stream, {}};
    builder.build(idx);
    return std::move(builder.nodes);
}

int tree_predict(const std::vector<TreeNode>& nodes, const std::vector<double>& x) {
    int cur = 0;
    while (!nodes[cur].leaf)
        cur = x[nodes[cur].feature] <= nodes[cur].threshold ? nodes[cur].left : nodes[cur].right;
    return nodes[cur].label;
}

void train_dt(TrainedModel& model, const AlgorithmSpec& spec, const Dataset& ds) {
    std::vector<size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    model.trees.push_back(
        build_tree(ds, idx, spec.min_samples_split, static_cast<int>(ds.dim()), nullptr));
}

void train_rf(TrainedModel& model, const AlgorithmSpec& spec, const Dataset& ds, uint64_t seed) {
    size_t n = ds.size();
    int mtry = spec.rf_feature_subsample
                   ? std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(ds.dim())))))
                   : static_cast<int>(ds.dim());
    RandomStream master(seed);
    for (int t = 0; t < spec.rf_trees; ++t) {
        RandomStream tree_stream = master.child(static_cast<uint64_t>(t));
        std::vector<size_t> idx;
        idx.reserve(n);
        if (spec.rf_bootstrap) {
            for (size_t i = 0; i < n; ++i)
                idx.push_back(static_cast<size_t>(tree_stream.uniform_int(n)));
        } else {
            idx.resize(n);
            std::iota(idx.begin(), idx.end(), 0);
        }
        model.trees.push_back(
            build_tree(ds, idx, spec.min_samples_split, mtry, &tree_stream));
    }
}

// --- kNN ---

void train_knn(TrainedModel& model, const Dataset& ds) {
    model.knn_x = ds.x;
    model.knn_y = ds.y;
}

int knn_predict(const TrainedModel& model, const std::vector<double>& q) {
    size_t n = model.knn_x.size();
    std::vector<std::pair<double, size_t>> dist;
    dist.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        double d2 = 0;
        for (size_t j = 0; j < q.size(); ++j) {
            double dv = q[j] - model.knn_x[i][j];
            d2 += dv * dv;
        }
        dist.emplace_back(d2, i); // index part breaks distance ties low-first
    }
    std::sort(dist.begin(), dist.end());
    size_t k = std::min<size_t>(static_cast<size_t>(model.spec.knn_k), n);
    int votes1 = 0;
    for (size_t r = 0; r < k; ++r) votes1 += model.knn_y[dist[r].second];
    return votes1 * 2 > static_cast<int>(k) ? 1 : 0; // tie -> STW
}

// --- MLP ---

double mlp_forward(const std::vector<MlpLayer>& layers, const std::vector<double>& x,
                   std::vector<std::vector<double>>& acts) {
    acts.clear();
    acts.push_back(x);
    for (size_t l = 0; l < layers.size(); ++l) {
        const MlpLayer& ly = layers[l];
        std::vector<double> z(static_cast<size_t>(ly.out));
        for (int o = 0; o < ly.out; ++o) {
            double s = ly.b[static_cast<size_t>(o)];
            const double* wrow = &ly.w[static_cast<size_t>(o) * ly.in];
            for (int i = 0; i < ly.in; ++i) s += wrow[i] * acts.back()[static_cast<size_t>(i)];
            z[static_cast<size_t>(o)] = s;
        }
        if (l + 1 < layers.size())
            for (auto& v : z) v = v > 0 ? v : 0.0; // ReLU on hidden layers
        acts.push_back(std::move(z));
    }
    return acts.back()[0];
}

struct Mlp {
    std::vector<MlpLayer> layers;

    static Mlp init(size_t dim, const std::vector<int>& hidden, RandomStream& stream) {
        Mlp net;
        std::vector<int> sizes;
        sizes.push_back(static_cast<int>(dim));
        for (int h : hidden) sizes.push_back(h);
        sizes.push_back(1);
        for (size_t l = 0; l + 1 < sizes.size(); ++l) {
            MlpLayer layer;
            layer.in = sizes[l];
            layer.out = sizes[l + 1];
            double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
            layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
            for (auto& v : layer.w) v = stream.uniform(-bound, bound);
            layer.b.assign(static_cast<size_t>(layer.out), 0.0);
            net.layers.push_back(std::move(layer));
        }
        return net;
    }

    // forward pass storing activations; returns output logit
    double forward(const std::vector<double>& x, std::vector<std::vector<double>>& acts) const {
        return mlp_forward(layers, x, acts);
    }

    // accumulates dLoss/dparam for one example into grads (same shapes as layers)
    void backward(const std::vector<std::vector<double>>& acts, double dz_out,
                  std::vector<MlpLayer>& grads) const {
        std::vector<double> delta{dz_out};
        for (size_t l = layers.size(); l-- > 0;) {
            const MlpLayer& ly = layers[l];
            const std::vector<double>& a_in = acts[l];
            MlpLayer& g = grads[l];
            for (int o = 0; o < ly.out; ++o) {
                g.b[static_cast<size_t>(o)] += delta[static_cast<size_t>(o)];
                double* grow = &g.w[static_cast<size_t>(o) * ly.in];
                for (int i = 0; i < ly.in; ++i)
                    grow[i] += delta[static_cast<size_t>(o)] * a_in[static_cast<size_t>(i)];
            }
            if (l == 0) break;
            std::vector<double> prev(static_cast<size_t>(ly.in), 0.0);
            for (int i = 0; i < ly.in; ++i) {
                double s = 0;
                for (int o = 0; o < ly.out; ++o)
                    s += ly.w[static_cast<size_t>(o) * ly.in + i] * delta[static_cast<size_t>(o)];
                // acts[l] holds the ReLU output of layer l-1
                prev[static_cast<size_t>(i)] = acts[l][static_cast<size_t>(i)] > 0 ? s : 0.0;
            }
            delta = std::move(prev);
        }
    }

    std::vector<MlpLayer> zero_grads() const {
        std::vector<MlpLayer> g = layers;
        for (auto& ly : g) {
            std::fill(ly.w.begin(), ly.w.end(), 0.0);
            std::fill(ly.b.begin(), ly.b.end(), 0.0);
        }
        return g;
    }
};

void train_mlp(TrainedModel& model, const AlgorithmSpec& spec, const Dataset& ds, uint64_t seed) {
    require_both_classes(ds, "MLP");
    Standardizer st = Standardizer::fit(ds.x);
    auto xs = st.apply(ds.x);
    RandomStream stream(seed);
    Mlp net = Mlp::init(ds.dim(), spec.mlp_layers, stream);

    size_t n = ds.size();
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<double>> acts;
    for (int epoch = 0; epoch < spec.mlp_epochs; ++epoch) {
        stream.shuffle(perm);
        for (size_t start = 0; start < n; start += static_cast<size_t>(spec.mlp_batch)) {
            size_t end = std::min(n, start + static_cast<size_t>(spec.mlp_batch));
            auto grads = net.zero_grads();
            for (size_t p = start; p < end; ++p) {
                size_t i = perm[p];
                double z = net.forward(xs[i], acts);
                double dz = sigmoid(z) - static_cast<double>(ds.y[i]);
                net.backward(acts, dz, grads);
            }
            double scale = spec.mlp_rate / static_cast<double>(end - start);
            for (size_t l = 0; l < net.layers.size(); ++l) {
                for (size_t k = 0; k < net.layers[l].w.size(); ++k)
                    net.layers[l].w[k] -= scale * grads[l].w[k];
                for (size_t k = 0; k < net.layers[l].b.size(); ++k)
                    net.layers[l].b[k] -= scale * grads[l].b[k];
            }
        }
    }

    // fold standardization into the first layer so predict consumes raw vectors
    MlpLayer& first = net.layers[0];
    for (int o = 0; o < first.out; ++o) {
        double* wrow = &first.w[static_cast<size_t>(o) * first.in];
        for (int i = 0; i < first.in; ++i) {
            first.b[static_cast<size_t>(o)] -= wrow[i] * st.mu[static_cast<size_t>(i)] /
                                               st.sigma[static_cast<size_t>(i)];
            wrow[i] /= st.sigma[static_cast<size_t>(i)];
        }
    }
    model.layers = std::move(net.layers);
}

double mlp_logit(const TrainedModel& model, const std::vector<double>& x) {
    std::vector<std::vector<double>> acts;
    return mlp_forward(model.layers, x, acts);
}

} // namespace

// --- train / predict / evaluate ---

TrainedModel train(const AlgorithmSpec& spec, const Dataset& train_set, uint64_t seed) {
    if (train_set.size() == 0) throw DataError("empty training set");
    TrainedModel model;
    model.spec = spec;
    model.dim = static_cast<int>(train_set.dim());
    switch (spec.kind) {
        case AlgoKind::LR: train_lr(model, spec, train_set); break;
        case AlgoKind::SVM: train_svm(model, spec, train_set); break;
        case AlgoKind::DT: train_dt(model, spec, train_set); break;
        case AlgoKind::RF: train_rf(model, spec, train_set, seed); break;
        case AlgoKind::KNN: train_knn(model, train_set); break;
        case AlgoKind::MLP: train_mlp(model, spec, train_set, seed); break;
    }
    return model;
}

int predict(const TrainedModel& model, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != model.dim)
        throw DataError("predict: input dimension " + std::to_string(x.size()) +
                        " does not match the model's " + std::to_string(model.dim));
    switch (model.spec.kind) {
        case AlgoKind::LR:
        case AlgoKind::SVM: {
            double z = model.bias;
            for (size_t j = 0; j < x.size(); ++j) z += model.weights[j] * x[j];
            return z > 0 ? 1 : 0; // z == 0 resolves to STW
        }
        case AlgoKind::DT:
            return tree_predict(model.trees[0], x);
        case AlgoKind::RF: {
            int votes1 = 0;
            for (const auto& tree : model.trees) votes1 += tree_predict(tree, x);
            return votes1 * 2 > static_cast<int>(model.trees.size()) ? 1 : 0; // tie -> STW
        }
        case AlgoKind::KNN:
            return knn_predict(model, x);
        case AlgoKind::MLP:
            return mlp_logit(model, x) > 0 ? 1 : 0;
    }
    throw TrainError("predict: unknown model kind");
}

std::vector<int> predict_batch(const TrainedModel& model,
                               const std::vector<std::vector<double>>& xs) {
    std::vector<int> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(predict(model, x));
    return out;
}

EvalReport evaluate(const TrainedModel& model, const Dataset& test, int timing_reps) {
    if (test.size() == 0) throw DataError("empty test set");
    EvalReport report;
    report.algorithm = model.spec.id();
    report.train_time_ms = model.train_time_ms;
    size_t correct = 0;
    for (size_t i = 0; i < test.size(); ++i)
        if (predict(model, test.x[i]) == test.y[i]) ++correct;
    report.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());

    // 1000-query timing: cycle the test rows, median over repetitions
    std::vector<const std::vector<double>*> queries;
    queries.reserve(1000);
    for (size_t i = 0; i < 1000; ++i) queries.push_back(&test.x[i % test.size()]);
    std::vector<double> times;
    int sink = 0;
    for (int rep = 0; rep < std::max(1, timing_reps); ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        for (const auto* q : queries) sink += predict(model, *q);
        auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    volatile int keep = sink;
    (void)keep;
    std::sort(times.begin(), times.end());
    size_t m = times.size();
    report.test_time_ms_per_1000 =
        m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
    return report;
}

// --- gradient checks ---

double gradient_check_lr(const Dataset& sample, double l2) {
    size_t d = sample.dim();
    // fixed nonzero evaluation point
    std::vector<double> w(d);
    for (size_t j = 0; j < d; ++j) w[j] = 0.3 * std::sin(static_cast<double>(j) + 1.0);
    double b = 0.15;
    std::vector<double> gw;
    double gb = 0;
    lr_loss_grad(sample.x, sample.y, w, b, l2, &gw, &gb);

    const double h = 1e-5;
    double worst = 0;
    auto rel = [](double ga, double gn) {
        return std::abs(ga - gn) / std::max(1e-8, std::abs(ga) + std::abs(gn));
    };
    for (size_t j = 0; j < d; ++j) {
        auto wp = w;
        wp[j] += h;
        double lp = lr_loss_grad(sample.x, sample.y, wp, b, l2, nullptr, nullptr);
        wp[j] -= 2 * h;
        double lm = lr_loss_grad(sample.x, sample.y, wp, b, l2, nullptr, nullptr);
        worst = std::max(worst, rel(gw[j], (lp - lm) / (2 * h)));
    }
    double lp = lr_loss_grad(sample.x, sample.y, w, b + h, l2, nullptr, nullptr);
    double lm = lr_loss_grad(sample.x, sample.y, w, b - h, l2, nullptr, nullptr);
    worst = std::max(worst, rel(gb, (lp - lm) / (2 * h)));
    return worst;
}

double gradient_check_mlp(const Dataset& sample, const std::vector<int>& hidden, uint64_t seed) {
    RandomStream stream(seed);
    Mlp net = Mlp::init(sample.dim(), hidden, stream);

    auto loss_of = [&](const Mlp& m) {
        std::vector<std::vector<double>> acts;
        double loss = 0;
        for (size_t i = 0; i < sample.size(); ++i) {
            double z = m.forward(sample.x[i], acts);
            loss += softplus(z) - static_cast<double>(sample.y[i]) * z;
        }
        return loss / static_cast<double>(sample.size());
    };

    auto grads = net.zero_grads();
    {
        std::vector<std::vector<double>> acts;
        for (size_t i = 0; i < sample.size(); ++i) {
            double z = net.forward(sample.x[i], acts);
            net.backward(acts, sigmoid(z) - static_cast<double>(sample.y[i]), grads);
        }
        for (auto& g : grads) {
            for (auto& v : g.w) v /= static_cast<double>(sample.size());
            for (auto& v : g.b) v /= static_cast<double>(sample.size());
        }
    }

    const double h = 1e-5;
    double worst = 0;
    auto rel = [](double ga, double gn) {
        return std::abs(ga - gn) / std::max(1e-8, std::abs(ga) + std::abs(gn));
    };
    for (size_t l = 0; l < net.layers.size(); ++l) {
        for (size_t k = 0; k < net.layers[l].w.size(); ++k) {
            double save = net.layers[l].w[k];
            net.layers[l].w[k] = save + h;
            double lp = loss_of(net);
            net.layers[l].w[k] = save - h;
            double lm = loss_of(net);
            net.layers[l].w[k] = save;
            worst = std::max(worst, rel(grads[l].w[k], (lp - lm) / (2 * h)));
        }
        for (size_t k = 0; k < net.layers[l].b.size(); ++k) {
            double save = net.layers[l].b[k];
            net.layers[l].b[k] = save + h;
            double lp = loss_of(net);
            net.layers[l].b[k] = save - h;
            double lm = loss_of(net);
            net.layers[l].b[k] = save;
            worst = std::max(worst, rel(grads[l].b[k], (lp - lm) / (2 * h)));
        }
    }
    return worst;
}

// --- serialization ---

namespace {

constexpr char kMagic[4] = {'G', 'N', 'I', 'R'};
constexpr uint32_t kModelVersion = 1;

void put_bytes(std::string& buf, const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
}
void put_u8(std::string& buf, uint8_t v) { put_bytes(buf, &v, 1); }
void put_u32(std::string& buf, uint32_t v) { put_bytes(buf, &v, 4); }
void put_i32(std::string& buf, int32_t v) { put_bytes(buf, &v, 4); }
void put_u64(std::string& buf, uint64_t v) { put_bytes(buf, &v, 8); }
void put_f64(std::string& buf, double v) { put_bytes(buf, &v, 8); }

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void get_bytes(void* p, size_t n) {
        if (pos + n > buf.size()) throw DataError("model file truncated");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    uint8_t u8() { uint8_t v; get_bytes(&v, 1); return v; }
    uint32_t u32() { uint32_t v; get_bytes(&v, 4); return v; }
    int32_t i32() { int32_t v; get_bytes(&v, 4); return v; }
    uint64_t u64() { uint64_t v; get_bytes(&v, 8); return v; }
    double f64() { double v; get_bytes(&v, 8); return v; }
};

} // namespace

void save_model(const std::filesystem::path& file, const TrainedModel& model) {
    std::string buf;
    put_bytes(buf, kMagic, 4);
    put_u32(buf, kModelVersion);
    put_u8(buf, static_cast<uint8_t>(model.spec.kind));
    put_i32(buf, model.spec.rf_trees);
    put_i32(buf, model.spec.knn_k);
    put_u32(buf, static_cast<uint32_t>(model.spec.mlp_layers.size()));
    for (int h : model.spec.mlp_layers) put_i32(buf, h);
    put_u8(buf, model.spec.rf_bootstrap ? 1 : 0);
    put_u8(buf, model.spec.rf_feature_subsample ? 1 : 0);
    put_u32(buf, model.mask_bits);
    put_u64(buf, model.split.seed);
    put_u8(buf, model.split.subject_mode ? 1 : 0);
    put_f64(buf, model.split.test_fraction);
    put_f64(buf, model.train_time_ms);
    put_u32(buf, static_cast<uint32_t>(model.dim));
    switch (model.spec.kind) {
        case AlgoKind::LR:
        case AlgoKind::SVM:
            put_u32(buf, static_cast<uint32_t>(model.weights.size()));
            for (double w : model.weights) put_f64(buf, w);
            put_f64(buf, model.bias);
            break;
        case AlgoKind::DT:
        case AlgoKind::RF:
            put_u32(buf, static_cast<uint32_t>(model.trees.size()));
            for (const auto& tree : model.trees) {
                put_u32(buf, static_cast<uint32_t>(tree.size()));
                for (const auto& nd : tree) {
                    put_u8(buf, nd.leaf ? 1 : 0);
                    put_i32(buf, nd.label);
                    put_i32(buf, nd.feature);
                    put_f64(buf, nd.threshold);
                    put_i32(buf, nd.left);
                    put_i32(buf, nd.right);
                }
            }
            break;
        case AlgoKind::KNN:
            put_u32(buf, static_cast<uint32_t>(model.knn_x.size()));
            put_u32(buf, static_cast<uint32_t>(model.dim));
            for (const auto& row : model.knn_x)
                for (double v : row) put_f64(buf, v);
            for (int y : model.knn_y) put_u8(buf, static_cast<uint8_t>(y));
            break;
        case AlgoKind::MLP:
            put_u32(buf, static_cast<uint32_t>(model.layers.size()));
            for (const auto& ly : model.layers) {
                put_i32(buf, ly.in);
                put_i32(buf, ly.out);
                for (double v : ly.w) put_f64(buf, v);
                for (double v : ly.b) put_f64(buf, v);
            }
            break;
    }
    write_text_file(file, buf);
}

TrainedModel load_model(const std::filesystem::path& file) {
    std::string buf = read_text_file(file);
    Reader in{buf};
    char magic[4];
    in.get_bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(file.string() + ": not a model file (bad magic)");
    uint32_t version = in.u32();
    if (version != kModelVersion)
        throw DataError(file.string() + ": unsupported model version " + std::to_string(version));
    TrainedModel model;
    uint8_t kind = in.u8();
    if (kind > static_cast<uint8_t>(AlgoKind::MLP))
        throw DataError(file.string() + ": unknown model kind tag");
    model.spec.kind = static_cast<AlgoKind>(kind);
    model.spec.rf_trees = in.i32();
    model.spec.knn_k = in.i32();
    uint32_t nh = in.u32();
    model.spec.mlp_layers.clear();
    for (uint32_t i = 0; i < nh; ++i) model.spec.mlp_layers.push_back(in.i32());
    model.spec.rf_bootstrap = in.u8() != 0;
    model.spec.rf_feature_subsample = in.u8() != 0;
    model.mask_bits = in.u32();
    model.split.seed = in.u64();
    model.split.subject_mode = in.u8() != 0;
    model.split.test_fraction = in.f64();
    model.train_time_ms = in.f64();
    model.dim = static_cast<int>(in.u32());
    switch (model.spec.kind) {
        case AlgoKind::LR:
        case AlgoKind::SVM: {
            uint32_t d = in.u32();
            model.weights.resize(d);
            for (auto& w : model.weights) w = in.f64();
            model.bias = in.f64();
            break;
        }
        case AlgoKind::DT:
        case AlgoKind::RF: {
            uint32_t nt = in.u32();
            for (uint32_t t = 0; t < nt; ++t) {
                uint32_t nn = in.u32();
                std::vector<TreeNode> tree(nn);
                for (auto& nd : tree) {
                    nd.leaf = in.u8() != 0;
                    nd.label = in.i32();
                    nd.feature = in.i32();
                    nd.threshold = in.f64();
                    nd.left = in.i32();
                    nd.right = in.i32();
                }
                model.trees.push_back(std::move(tree));
            }
            break;
        }
        case AlgoKind::KNN: {
            uint32_t n = in.u32(), d = in.u32();
            model.knn_x.assign(n, std::vector<double>(d));
            for (auto& row : model.knn_x)
                for (auto& v : row) v = in.f64();
            model.knn_y.resize(n);
            for (auto& y : model.knn_y) y = in.u8();
            break;
        }
        case AlgoKind::MLP: {
            uint32_t nl = in.u32();
            for (uint32_t l = 0; l < nl; ++l) {
                MlpLayer ly;
                ly.in = in.i32();
                ly.out = in.i32();
                ly.w.resize(static_cast<size_t>(ly.in) * ly.out);
                for (auto& v : ly.w) v = in.f64();
                ly.b.resize(static_cast<size_t>(ly.out));
                for (auto& v : ly.b) v = in.f64();
                model.layers.push_back(std::move(ly));
            }
            break;
        }
    }
    return model;
}

} // namespace gaitnirs
