#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vaxpulse/common.hpp"
#include "vaxpulse/textprep.hpp"

namespace vaxpulse::classify {

// Fixed class order F < C < U < OOC; all argmax ties break towards the
// smaller index. Evaluation metrics are tie-sensitive, so the order is part
// of the contract.
enum class PolarityLabel : int { Favourable = 0, Contrary = 1, Undecided = 2, OutOfContext = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<PolarityLabel, kNumClasses> kAllLabels = {
    PolarityLabel::Favourable, PolarityLabel::Contrary, PolarityLabel::Undecided,
    PolarityLabel::OutOfContext};

std::string label_code(PolarityLabel label);                 // "F","C","U","OOC"
PolarityLabel parse_label(std::string_view code);            // throws ContractViolation

struct LabeledPost {
    std::string post_id;
    text::FeatureVector features;
    PolarityLabel label = PolarityLabel::OutOfContext;
};

// One weight vector and bias per class over a frozen vocabulary. Both the
// SVM and naive Bayes reduce to this shape; prediction is the score argmax.
struct LinearModel {
    std::string algorithm;  // "svm" | "nb"
    std::size_t vocab_size = 0;
    std::string vocab_ref;  // digest of the vocabulary the weights index into
    std::array<std::vector<double>, kNumClasses> weights;
    std::array<double, kNumClasses> bias{};
    std::map<std::string, double> config;
    std::uint64_t seed = 0;

    std::array<double, kNumClasses> scores(const text::FeatureVector& fv) const;
    PolarityLabel predict(const text::FeatureVector& fv) const;

    std::string to_json() const;
    static LinearModel from_json(std::string_view payload);
};

struct SvmConfig {
    int epochs = 10;
    double reg = 1e-2;  // lambda; learning rate at step t is 1/(reg*t)
};

// One-vs-rest linear SVM, hinge loss, Pegasos-style stochastic subgradient
// descent. Pass order is a seeded shuffle per epoch, so training is
// deterministic given the seed.
LinearModel train_svm(const std::vector<LabeledPost>& data, std::size_t vocab_size,
                      const SvmConfig& cfg, std::uint64_t seed);

// Multinomial naive Bayes in log space with Laplace smoothing; weights are
// log conditional probabilities and the bias is the log prior.
LinearModel train_nb(const std::vector<LabeledPost>& data, std::size_t vocab_size,
                     double laplace_alpha = 1.0);

// k-nearest neighbours under cosine similarity, majority vote. Similarity
// ties keep the earlier training row; vote ties pick the smaller class.
PolarityLabel predict_knn(const std::vector<LabeledPost>& train, const text::FeatureVector& query,
                          int k);

struct ClassMetrics {
    double precision = 0, recall = 0, f1 = 0;
    std::size_t support = 0;
};

struct EvalReport {
    std::array<ClassMetrics, kNumClasses> per_class;
    double accuracy = 0;
    ClassMetrics macro_avg;     // unweighted class mean
    ClassMetrics weighted_avg;  // support-weighted mean
    std::size_t total = 0;

    std::string to_json() const;
};

EvalReport evaluate(const std::vector<PolarityLabel>& predictions,
                    const std::vector<PolarityLabel>& truth);

double f1_from_pr(double precision, double recall);

// Support-weighted mean of per-class values (the Table-style "weighted avg").
double weighted_average(const std::vector<double>& values, const std::vector<std::size_t>& support);

enum class Algorithm : int { Svm = 0, NaiveBayes = 1, Knn = 2 };

std::string algorithm_name(Algorithm a);

struct SelectConfig {
    SvmConfig svm;
    double nb_alpha = 1.0;
    int knn_k = 5;
};

struct ModelSelection {
    Algorithm best;
    std::map<Algorithm, EvalReport> reports;  // cross-validated, per algorithm
};

// Stratified k-fold cross-validation over the candidate algorithms; the
// winner is the highest cross-validated weighted F1 (ties: algorithm order).
ModelSelection model_select(const std::vector<LabeledPost>& data, std::size_t vocab_size,
                            int folds, const std::set<Algorithm>& algorithms, std::uint64_t seed,
                            const SelectConfig& cfg = {});

// labels / predictions CSV: header "post_id,label", labels in {F,C,U,OOC}
void write_labels_csv(std::ostream& out, const std::vector<std::pair<std::string, PolarityLabel>>& rows);
std::vector<std::pair<std::string, PolarityLabel>> read_labels_csv(std::istream& in);

void print_eval_table(std::ostream& out, const EvalReport& report);

}  // namespace vaxpulse::classify
