#include "vaxpulse/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

namespace vaxpulse::classify {

using nlohmann::json;

std::string label_code(PolarityLabel label) {
    switch (label) {
        case PolarityLabel::Favourable: return "F";
        case PolarityLabel::Contrary: return "C";
        case PolarityLabel::Undecided: return "U";
        case PolarityLabel::OutOfContext: return "OOC";
    }
    throw ContractViolation("invalid label value");
}

PolarityLabel parse_label(std::string_view code) {
    if (code == "F") return PolarityLabel::Favourable;
    if (code == "C") return PolarityLabel::Contrary;
    if (code == "U") return PolarityLabel::Undecided;
    if (code == "OOC") return PolarityLabel::OutOfContext;
    throw ContractViolation("unknown label code: " + std::string(code));
}

std::array<double, kNumClasses> LinearModel::scores(const text::FeatureVector& fv) const {
    std::array<double, kNumClasses> s = bias;
    for (auto [idx, count] : fv.entries) {
        if (idx >= vocab_size) throw ContractViolation("feature index out of vocabulary range");
        for (int c = 0; c < kNumClasses; ++c)
            if (!weights[c].empty()) s[c] += weights[c][idx] * count;
    }
    return s;
}

PolarityLabel LinearModel::predict(const text::FeatureVector& fv) const {
    auto s = scores(fv);
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
        if (s[c] > s[best]) best = c;
    return static_cast<PolarityLabel>(best);
}

std::string LinearModel::to_json() const {
    json j;
    j["algorithm"] = algorithm;
    j["vocab_size"] = vocab_size;
    j["vocab_ref"] = vocab_ref;
    j["seed"] = seed;
    j["config"] = config;
    j["classes"] = json::array();
    for (auto label : kAllLabels) j["classes"].push_back(label_code(label));
    j["bias"] = bias;
    json w = json::array();
    for (int c = 0; c < kNumClasses; ++c) {
        json sparse = json::array();  // store nonzeros only
        for (std::size_t i = 0; i < weights[c].size(); ++i)
            if (weights[c][i] != 0.0) sparse.push_back({i, weights[c][i]});
        w.push_back(std::move(sparse));
    }
    j["weights"] = std::move(w);
    return j.dump();
}

LinearModel LinearModel::from_json(std::string_view payload) {
    json j = json::parse(payload);
    LinearModel m;
    m.algorithm = j.at("algorithm").get<std::string>();
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.vocab_ref = j.value("vocab_ref", std::string{});
    m.seed = j.value("seed", 0ull);
    if (j.contains("config")) m.config = j["config"].get<std::map<std::string, double>>();
    auto bias = j.at("bias");
    for (int c = 0; c < kNumClasses; ++c) m.bias[c] = bias.at(c).get<double>();
    auto w = j.at("weights");
    for (int c = 0; c < kNumClasses; ++c) {
        m.weights[c].assign(m.vocab_size, 0.0);
        for (const auto& pair : w.at(c))
            m.weights[c].at(pair.at(0).get<std::size_t>()) = pair.at(1).get<double>();
    }
    return m;
}

namespace {

int count_distinct_classes(const std::vector<LabeledPost>& data) {
    std::array<bool, kNumClasses> seen{};
    for (const auto& p : data) seen[static_cast<int>(p.label)] = true;
    return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

}  // namespace

LinearModel train_svm(const std::vector<LabeledPost>& data, std::size_t vocab_size,
                      const SvmConfig& cfg, std::uint64_t seed) {
    if (count_distinct_classes(data) < 2)
        throw DegenerateTraining("train_svm: need at least 2 classes");
    if (cfg.reg <= 0) throw ContractViolation("train_svm: reg must be positive");
    if (cfg.epochs < 1) throw ContractViolation("train_svm: epochs must be >= 1");

    LinearModel model;
    model.algorithm = "svm";
    model.vocab_size = vocab_size;
    model.seed = seed;
    model.config = {{"epochs", static_cast<double>(cfg.epochs)}, {"reg", cfg.reg}};

    // w is kept as scale * v so the per-step shrink (1 - eta*lambda) is O(1).
    std::array<std::vector<double>, kNumClasses> v;
    std::array<double, kNumClasses> scale;
    scale.fill(1.0);
    for (auto& vc : v) vc.assign(vocab_size, 0.0);
    std::array<double, kNumClasses> bias{};

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);

    const double lambda = cfg.reg;
    std::uint64_t t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t row : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double shrink = 1.0 - eta * lambda;  // = 1 - 1/t
            const auto& post = data[row];
            for (int c = 0; c < kNumClasses; ++c) {
                double dot = 0;
                for (auto [idx, count] : post.features.entries) dot += v[c][idx] * count;
                const double score = scale[c] * dot + bias[c];
                const double y = post.label == static_cast<PolarityLabel>(c) ? 1.0 : -1.0;
                scale[c] *= shrink;
                if (scale[c] < 1e-9) {  // fold the scale back in before it underflows
                    for (auto& w : v[c]) w *= scale[c];
                    scale[c] = 1.0;
                }
                if (y * score < 1.0) {
                    const double step = eta * y / scale[c];
                    for (auto [idx, count] : post.features.entries) v[c][idx] += step * count;
                    bias[c] += eta * y;
                }
            }
        }
    }
    for (int c = 0; c < kNumClasses; ++c) {
        model.weights[c] = std::move(v[c]);
        for (auto& w : model.weights[c]) w *= scale[c];
        model.bias[c] = bias[c];
    }
    return model;
}

LinearModel train_nb(const std::vector<LabeledPost>& data, std::size_t vocab_size,
                     double laplace_alpha) {
    if (count_distinct_classes(data) < 2)
        throw DegenerateTraining("train_nb: need at least 2 classes");
    if (!(laplace_alpha > 0)) throw ContractViolation("train_nb: laplace_alpha must be positive");

    LinearModel model;
    model.algorithm = "nb";
    model.vocab_size = vocab_size;
    model.config = {{"laplace_alpha", laplace_alpha}};

    std::array<std::vector<double>, kNumClasses> counts;
    for (auto& c : counts) c.assign(vocab_size, 0.0);
    std::array<double, kNumClasses> class_total{};
    std::array<double, kNumClasses> class_docs{};
    for (const auto& p : data) {
        int c = static_cast<int>(p.label);
        class_docs[c] += 1;
        for (auto [idx, count] : p.features.entries) {
            counts[c][idx] += count;
            class_total[c] += count;
        }
    }
    const double n_docs = static_cast<double>(data.size());
    for (int c = 0; c < kNumClasses; ++c) {
        model.bias[c] = class_docs[c] > 0 ? std::log(class_docs[c] / n_docs)
                                          : -std::numeric_limits<double>::infinity();
        const double denom =
            std::log(class_total[c] + laplace_alpha * static_cast<double>(vocab_size));
        model.weights[c].resize(vocab_size);
        for (std::size_t i = 0; i < vocab_size; ++i)
            model.weights[c][i] = std::log(counts[c][i] + laplace_alpha) - denom;
    }
    return model;
}

PolarityLabel predict_knn(const std::vector<LabeledPost>& train, const text::FeatureVector& query,
                          int k) {
    if (train.empty()) throw ContractViolation("predict_knn: empty training set");
    if (k < 1 || k % 2 == 0) throw ContractViolation("predict_knn: k must be odd and positive");
    if (static_cast<std::size_t>(k) > train.size())
        throw ContractViolation("predict_knn: k exceeds training size");

    const double qnorm = query.norm();
    std::vector<std::pair<double, std::size_t>> sims(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& fv = train[i].features;
        double dot = 0;
        auto a = query.entries.begin();
        auto b = fv.entries.begin();
        while (a != query.entries.end() && b != fv.entries.end()) {
            if (a->first < b->first)
                ++a;
            else if (b->first < a->first)
                ++b;
            else {
                dot += static_cast<double>(a->second) * b->second;
                ++a;
                ++b;
            }
        }
        const double denom = qnorm * fv.norm();
        sims[i] = {denom > 0 ? dot / denom : 0.0, i};
    }
    std::stable_sort(sims.begin(), sims.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::array<int, kNumClasses> votes{};
    for (int i = 0; i < k; ++i) ++votes[static_cast<int>(train[sims[i].second].label)];
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
        if (votes[c] > votes[best]) best = c;
    return static_cast<PolarityLabel>(best);
}

double f1_from_pr(double precision, double recall) {
    if (precision + recall == 0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double weighted_average(const std::vector<double>& values,
                        const std::vector<std::size_t>& support) {
    if (values.size() != support.size())
        throw ContractViolation("weighted_average: size mismatch");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        num += values[i] * static_cast<double>(support[i]);
        den += static_cast<double>(support[i]);
    }
    return den > 0 ? num / den : 0.0;
}

EvalReport evaluate(const std::vector<PolarityLabel>& predictions,
                    const std::vector<PolarityLabel>& truth) {
    if (predictions.size() != truth.size())
        throw ContractViolation("evaluate: predictions and truth differ in length");
    if (truth.empty()) throw ContractViolation("evaluate: empty input");

    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [truth][pred]
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++confusion[static_cast<int>(truth[i])][static_cast<int>(predictions[i])];

    EvalReport report;
    report.total = truth.size();
    std::size_t correct = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        std::size_t tp = confusion[c][c];
        std::size_t fp = 0, fn = 0;
        for (int o = 0; o < kNumClasses; ++o) {
            if (o == c) continue;
            fp += confusion[o][c];
            fn += confusion[c][o];
        }
        correct += tp;
        auto& m = report.per_class[c];
        m.support = tp + fn;
        m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        m.f1 = f1_from_pr(m.precision, m.recall);
    }
    report.accuracy = static_cast<double>(correct) / report.total;

    for (const auto& m : report.per_class) {
        report.macro_avg.precision += m.precision / kNumClasses;
        report.macro_avg.recall += m.recall / kNumClasses;
        report.macro_avg.f1 += m.f1 / kNumClasses;
        report.weighted_avg.precision += m.precision * m.support;
        report.weighted_avg.recall += m.recall * m.support;
        report.weighted_avg.f1 += m.f1 * m.support;
    }
    report.macro_avg.support = report.total;
    report.weighted_avg.support = report.total;
    report.weighted_avg.precision /= report.total;
    report.weighted_avg.recall /= report.total;
    report.weighted_avg.f1 /= report.total;
    return report;
}

std::string EvalReport::to_json() const {
    json j;
    auto metrics = [](const ClassMetrics& m) {
        return json{{"precision", m.precision},
                    {"recall", m.recall},
                    {"f1", m.f1},
                    {"support", m.support}};
    };
    for (int c = 0; c < kNumClasses; ++c)
        j["classes"][label_code(static_cast<PolarityLabel>(c))] = metrics(per_class[c]);
    j["accuracy"] = accuracy;
    j["macro_avg"] = metrics(macro_avg);
    j["weighted_avg"] = metrics(weighted_avg);
    j["total"] = total;
    return j.dump();
}

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Svm: return "svm";
        case Algorithm::NaiveBayes: return "nb";
        case Algorithm::Knn: return "knn";
    }
    throw ContractViolation("invalid algorithm value");
}

ModelSelection model_select(const std::vector<LabeledPost>& data, std::size_t vocab_size,
                            int folds, const std::set<Algorithm>& algorithms, std::uint64_t seed,
                            const SelectConfig& cfg) {
    if (folds < 2) throw ContractViolation("model_select: folds must be >= 2");
    if (algorithms.empty()) throw ContractViolation("model_select: no algorithms given");

    // stratified fold assignment: per class, seeded shuffle then round-robin
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<int>(data[i].label)].push_back(i);
    std::vector<int> fold_of(data.size(), -1);
    for (int c = 0; c < kNumClasses; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        if (idx.size() < static_cast<std::size_t>(folds))
            throw StratificationError("model_select: class " +
                                      label_code(static_cast<PolarityLabel>(c)) + " has " +
                                      std::to_string(idx.size()) + " members, fewer than " +
                                      std::to_string(folds) + " folds");
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold_of[idx[i]] = static_cast<int>(i % folds);
    }

    ModelSelection result{*algorithms.begin(), {}};
    double best_f1 = -1;
    for (Algorithm algo : algorithms) {
        std::vector<PolarityLabel> pooled_pred(data.size());
        for (int f = 0; f < folds; ++f) {
            std::vector<LabeledPost> train_set;
            std::vector<std::size_t> test_rows;
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (fold_of[i] == f)
                    test_rows.push_back(i);
                else
                    train_set.push_back(data[i]);
            }
            if (algo == Algorithm::Knn) {
                int k = std::min<int>(cfg.knn_k, static_cast<int>(train_set.size()));
                if (k % 2 == 0) --k;
                for (std::size_t i : test_rows)
                    pooled_pred[i] = predict_knn(train_set, data[i].features, k);
            } else {
                LinearModel model =
                    algo == Algorithm::Svm
                        ? train_svm(train_set, vocab_size, cfg.svm,
                                    derive_seed(seed, 1000 + static_cast<std::uint64_t>(f)))
                        : train_nb(train_set, vocab_size, cfg.nb_alpha);
                for (std::size_t i : test_rows) pooled_pred[i] = model.predict(data[i].features);
            }
        }
        std::vector<PolarityLabel> truth(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) truth[i] = data[i].label;
        EvalReport report = evaluate(pooled_pred, truth);
        if (report.weighted_avg.f1 > best_f1) {
            best_f1 = report.weighted_avg.f1;
            result.best = algo;
        }
        result.reports.emplace(algo, std::move(report));
    }
    return result;
}

void write_labels_csv(std::ostream& out,
                      const std::vector<std::pair<std::string, PolarityLabel>>& rows) {
    out << "post_id,label\n";
    for (const auto& [id, label] : rows) out << id << ',' << label_code(label) << '\n';
}

std::vector<std::pair<std::string, PolarityLabel>> read_labels_csv(std::istream& in) {
    std::vector<std::pair<std::string, PolarityLabel>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first) {
            first = false;
            if (line.rfind("post_id,", 0) == 0) continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != 2) throw ContractViolation("labels csv: bad row: " + line);
        rows.emplace_back(fields[0], parse_label(trim(fields[1])));
    }
    return rows;
}

void print_eval_table(std::ostream& out, const EvalReport& report) {
    char buf[160];
    out << "               precision  recall  f1-score  support\n";
    static const char* names[] = {"Favourable", "Contrary", "Undecided", "OutOfContext"};
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& m = report.per_class[c];
        std::snprintf(buf, sizeof buf, "%-14s %9.2f %7.2f %9.2f %8zu\n", names[c], m.precision,
                      m.recall, m.f1, m.support);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-14s %9s %7s %9.2f %8zu\n", "accuracy", "", "",
                  report.accuracy, report.total);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-14s %9.2f %7.2f %9.2f %8zu\n", "macro avg",
                  report.macro_avg.precision, report.macro_avg.recall, report.macro_avg.f1,
                  report.total);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-14s %9.2f %7.2f %9.2f %8zu\n", "weighted avg",
                  report.weighted_avg.precision, report.weighted_avg.recall,
                  report.weighted_avg.f1, report.total);
    out << buf;
}

}  // namespace vaxpulse::classify
