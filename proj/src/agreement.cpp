#include "vaxpulse/agreement.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <boost/math/distributions/beta.hpp>

namespace vaxpulse::agree {

int RatingMatrix::raters_per_item() const {
    if (counts.empty()) throw ContractViolation("rating matrix: no items");
    const std::size_t cats = counts[0].size();
    if (cats < 2) throw ContractViolation("rating matrix: need at least 2 categories");
    int n = -1;
    for (const auto& row : counts) {
        if (row.size() != cats) throw ContractViolation("rating matrix: ragged rows");
        int sum = 0;
        for (int c : row) {
            if (c < 0) throw ContractViolation("rating matrix: negative count");
            sum += c;
        }
        if (n < 0) n = sum;
        if (sum != n) throw ContractViolation("rating matrix: row sums differ");
    }
    if (n < 2) throw ContractViolation("rating matrix: need at least 2 raters per item");
    return n;
}

double fleiss_kappa(const RatingMatrix& m) {
    const int n = m.raters_per_item();
    const std::size_t N = m.items();
    const std::size_t K = m.categories();

    double p_bar = 0;
    std::vector<double> category_share(K, 0.0);
    for (const auto& row : m.counts) {
        double agree = 0;
        for (std::size_t j = 0; j < K; ++j) {
            agree += static_cast<double>(row[j]) * row[j];
            category_share[j] += row[j];
        }
        p_bar += (agree - n) / (static_cast<double>(n) * (n - 1));
    }
    p_bar /= static_cast<double>(N);

    double pe_bar = 0;
    for (double s : category_share) {
        const double pj = s / (static_cast<double>(N) * n);
        pe_bar += pj * pj;
    }
    if (pe_bar >= 1.0) return 1.0;  // all ratings in one category
    return (p_bar - pe_bar) / (1.0 - pe_bar);
}

BinomialCi accuracy_ci(std::size_t correct, std::size_t total, double level) {
    if (total < 1) throw ContractViolation("accuracy_ci: total must be >= 1");
    if (correct > total) throw ContractViolation("accuracy_ci: correct exceeds total");
    if (!(level > 0 && level < 1)) throw ContractViolation("accuracy_ci: level must be in (0,1)");

    const double alpha = 1.0 - level;
    BinomialCi ci;
    ci.point = static_cast<double>(correct) / static_cast<double>(total);
    const auto x = static_cast<double>(correct);
    const auto n = static_cast<double>(total);
    if (correct == 0) {
        ci.lower = 0.0;
    } else {
        boost::math::beta_distribution<double> lo(x, n - x + 1);
        ci.lower = boost::math::quantile(lo, alpha / 2);
    }
    if (correct == total) {
        ci.upper = 1.0;
    } else {
        boost::math::beta_distribution<double> hi(x + 1, n - x);
        ci.upper = boost::math::quantile(hi, 1.0 - alpha / 2);
    }
    return ci;
}

RatingMatrix read_rating_csv(std::istream& in) {
    RatingMatrix m;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<int> row;
        bool numeric = true;
        for (const auto& field : split(line, ',')) {
            try {
                row.push_back(std::stoi(trim(field)));
            } catch (...) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (m.counts.empty()) continue;  // header line
            throw ContractViolation("rating csv: non-numeric row: " + line);
        }
        m.counts.push_back(std::move(row));
    }
    return m;
}

void write_rating_csv(std::ostream& out, const RatingMatrix& m) {
    for (const auto& row : m.counts) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ',';
            out << row[j];
        }
        out << '\n';
    }
}

}  // namespace vaxpulse::agree
