#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vaxpulse/common.hpp"
#include "vaxpulse/polarity.hpp"

namespace vaxpulse::smooth {

// Discrete beta-kernel weights at evaluation point m in [0,1] over support
// points xs: w_i(m) proportional to x_i^(m/h) * (1-x_i)^((1-m)/h), computed
// in log space with 0^0 = 1 and normalized to sum to 1 over the support, so
// no weight ever falls outside it.
std::vector<double> beta_weights(std::span<const double> xs, double m, double h);

// Uniform support grid x_i = i/(T-1).
std::vector<double> unit_grid(std::size_t t);

// Smooth y (observed at the unit grid) at every support point.
std::vector<double> beta_kernel_smooth(std::span<const double> y, double h);

// The three polarity components smoothed with shared weights over the
// non-zero days; shared weights keep the components summing to one, with a
// final renormalization pinning the invariant exactly. The optional
// count-weighted mode multiplies kernel weights by daily post counts.
struct SmoothedSeries {
    std::vector<Date> dates;                      // non-zero (support) days
    std::array<std::vector<double>, 3> smoothed;  // F, C, U
    std::array<std::vector<double>, 3> raw;       // observed proportions
    std::vector<std::int64_t> counts;             // daily n over the support
    double h = 0;

    std::size_t size() const { return dates.size(); }
};

SmoothedSeries smooth_series(const polarity::PolaritySeries& series, double h,
                             bool count_weighted = false);

struct CvResult {
    double h_star = 0;
    bool constant_series = false;
    std::vector<std::pair<double, double>> trace;  // (h, LOO score)
};

// Leave-one-out bandwidth selection: for each h the score is the sum of
// squared LOO prediction errors; ties and constant series resolve to the
// smallest grid value.
CvResult cv_bandwidth(std::span<const double> y, std::span<const double> h_grid);

std::vector<double> log_spaced_grid(double lo, double hi, int n);

struct DegreeFit {
    int degree = 0;
    std::vector<double> coeffs;  // ascending powers of u = (i - u_mean)/u_scale
    double r2 = 0;
    double rss = 0;
};

struct TrendFit {
    std::vector<DegreeFit> degrees;     // degrees 1..d_max
    int selected = 1;
    std::vector<double> step_pvalues;   // partial-F p for step d -> d+1
    double u_mean = 0, u_scale = 1;     // affine map from support index to u
    bool covariance_aware = false;
    double sigma2 = 0;                  // noise variance used by the F tests

    const DegreeFit& selected_fit() const { return degrees[selected - 1]; }
    std::string to_json() const;
};

struct StepwiseOptions {
    int d_max = 4;
    double alpha = 0.05;
    // Raw series behind the smoothed input plus the bandwidth it was
    // smoothed with. When both are present, the partial-F tests account for
    // the smoothing covariance: each coefficient's variance is scaled by the
    // kernel weight matrix, with the noise variance taken per day from
    // day_variance when available (e.g. the known sampling variance
    // p(1-p)/n of a daily proportion) and otherwise estimated from first
    // differences of the raw series. Without kernel_h the classical
    // iid-residual partial-F applies (appropriate for unsmoothed input).
    std::vector<double> raw;
    std::optional<double> kernel_h;
    std::vector<double> day_variance;
};

// Ordinary least squares of y on polynomials of centered/scaled support
// index, degrees 1..d_max; the selected degree is the smallest whose next
// step's partial-F p-value exceeds alpha.
TrendFit polyfit_stepwise(std::span<const double> y, const StepwiseOptions& opt = {});

// Component fit of a smoothed series with covariance-aware testing wired up.
TrendFit polyfit_stepwise(const SmoothedSeries& series, int component, int d_max = 4);

double eval_poly(const std::vector<double>& coeffs, double u);

struct TrendMetrics {
    double smoothed_min = 0, smoothed_max = 0;  // amplitude of the component
    double peak_index = 0;                      // fractional support index
    Date peak_date;
    double peak_value = 0;
    double end_value = 0;
    double decline = 0;  // fitted value at span end minus fitted peak
};

TrendMetrics trend_metrics(const SmoothedSeries& series, const TrendFit& fit, int component = 0);

void write_smoothed_csv(std::ostream& out, const SmoothedSeries& series);
std::string smooth_meta_json(const SmoothedSeries& series, const CvResult* cv);
std::string trend_metrics_json(const TrendMetrics& m);

}  // namespace vaxpulse::smooth
