#pragma once

#include <iosfwd>
#include <vector>

#include "vaxpulse/common.hpp"

namespace vaxpulse::agree {

// Items x categories matrix of rater counts; every row must sum to the same
// number of raters (>= 2).
struct RatingMatrix {
    std::vector<std::vector<int>> counts;

    std::size_t items() const { return counts.size(); }
    std::size_t categories() const { return counts.empty() ? 0 : counts[0].size(); }
    int raters_per_item() const;  // validates and returns the common row sum
};

// Fleiss' kappa: (P_bar - Pe_bar) / (1 - Pe_bar). Returns 1 by convention
// when chance agreement Pe_bar is 1 (every rating in a single category).
double fleiss_kappa(const RatingMatrix& m);

struct BinomialCi {
    double point = 0, lower = 0, upper = 1;
};

// Clopper-Pearson exact binomial interval at the given confidence level.
BinomialCi accuracy_ci(std::size_t correct, std::size_t total, double level);

// CSV: one row per item, one integer count column per category.
RatingMatrix read_rating_csv(std::istream& in);
void write_rating_csv(std::ostream& out, const RatingMatrix& m);

}  // namespace vaxpulse::agree
