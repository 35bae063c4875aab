#include "vaxpulse/smoothfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <boost/math/distributions/fisher_f.hpp>
#include <json.hpp>

namespace vaxpulse::smooth {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log of x_i^a * (1-x_i)^b with the 0^0 = 1 endpoint convention
double log_kernel(double lx, double l1x, double a, double b) {
    double lw = 0;
    if (a > 0)
        lw += lx == kNegInf ? kNegInf : a * lx;
    if (b > 0)
        lw += l1x == kNegInf ? kNegInf : b * l1x;
    return lw;
}

struct SupportLogs {
    std::vector<double> lx, l1x;

    explicit SupportLogs(std::span<const double> xs) {
        lx.resize(xs.size());
        l1x.resize(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            lx[i] = xs[i] > 0 ? std::log(xs[i]) : kNegInf;
            l1x[i] = xs[i] < 1 ? std::log1p(-xs[i]) : kNegInf;
        }
    }
};

void check_bandwidth(double h) {
    if (!(h > 0)) throw ContractViolation("bandwidth h must be > 0");
}

}  // namespace

std::vector<double> unit_grid(std::size_t t) {
    std::vector<double> xs(t);
    for (std::size_t i = 0; i < t; ++i)
        xs[i] = t > 1 ? static_cast<double>(i) / static_cast<double>(t - 1) : 0.0;
    return xs;
}

std::vector<double> beta_weights(std::span<const double> xs, double m, double h) {
    check_bandwidth(h);
    if (xs.size() < 2) throw InsufficientData("beta_weights: need at least 2 support points");
    if (!(m >= 0 && m <= 1)) throw ContractViolation("beta_weights: m must lie in [0,1]");

    SupportLogs logs(xs);
    const double a = m / h, b = (1 - m) / h;
    std::vector<double> lw(xs.size());
    double lmax = kNegInf;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        lw[i] = log_kernel(logs.lx[i], logs.l1x[i], a, b);
        lmax = std::max(lmax, lw[i]);
    }
    std::vector<double> w(xs.size());
    double sum = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        w[i] = lw[i] == kNegInf ? 0.0 : std::exp(lw[i] - lmax);
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

std::vector<double> beta_kernel_smooth(std::span<const double> y, double h) {
    check_bandwidth(h);
    if (y.size() < 2) throw InsufficientData("beta_kernel_smooth: need at least 2 points");
    const auto xs = unit_grid(y.size());
    std::vector<double> out(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) {
        const auto w = beta_weights(xs, xs[j], h);
        double v = 0;
        for (std::size_t i = 0; i < y.size(); ++i) v += w[i] * y[i];
        out[j] = v;
    }
    return out;
}

SmoothedSeries smooth_series(const polarity::PolaritySeries& series, double h,
                             bool count_weighted) {
    check_bandwidth(h);
    SmoothedSeries out;
    out.h = h;
    for (const auto& d : series.days) {
        if (d.n() == 0) continue;
        out.dates.push_back(d.date);
        out.counts.push_back(d.n());
        out.raw[0].push_back(d.pF());
        out.raw[1].push_back(d.pC());
        out.raw[2].push_back(d.pU());
    }
    const std::size_t t = out.dates.size();
    if (t < 2) throw InsufficientData("smooth_series: need at least 2 non-zero days");

    const auto xs = unit_grid(t);
    for (auto& comp : out.smoothed) comp.resize(t);
    for (std::size_t j = 0; j < t; ++j) {
        auto w = beta_weights(xs, xs[j], h);
        if (count_weighted) {
            double sum = 0;
            for (std::size_t i = 0; i < t; ++i) {
                w[i] *= static_cast<double>(out.counts[i]);
                sum += w[i];
            }
            for (auto& v : w) v /= sum;
        }
        std::array<double, 3> acc{};
        for (std::size_t i = 0; i < t; ++i)
            for (int c = 0; c < 3; ++c) acc[c] += w[i] * out.raw[c][i];
        const double norm = acc[0] + acc[1] + acc[2];  // common factor, ~1
        for (int c = 0; c < 3; ++c) out.smoothed[c][j] = acc[c] / norm;
    }
    return out;
}

std::vector<double> log_spaced_grid(double lo, double hi, int n) {
    if (!(lo > 0 && hi > lo) || n < 2) throw ContractViolation("log_spaced_grid: bad parameters");
    std::vector<double> grid(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i)
        grid[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / (n - 1));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

CvResult cv_bandwidth(std::span<const double> y, std::span<const double> h_grid) {
    if (y.size() < 10) throw InsufficientData("cv_bandwidth: need at least 10 points");
    if (h_grid.empty()) throw ContractViolation("cv_bandwidth: empty grid");
    std::vector<double> grid(h_grid.begin(), h_grid.end());
    std::sort(grid.begin(), grid.end());
    if (!(grid.front() > 0)) throw ContractViolation("cv_bandwidth: bandwidths must be > 0");

    CvResult result;
    const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    if (*mx - *mn == 0.0) {
        result.constant_series = true;
        result.h_star = grid.front();
        return result;
    }

    const std::size_t t = y.size();
    const auto xs = unit_grid(t);
    SupportLogs logs(xs);
    std::vector<double> lw(t);
    double best = std::numeric_limits<double>::infinity();
    result.h_star = grid.front();
    for (double h : grid) {
        double score = 0;
        for (std::size_t j = 0; j < t; ++j) {
            const double a = xs[j] / h, b = (1 - xs[j]) / h;
            double lmax = kNegInf;
            for (std::size_t i = 0; i < t; ++i) {
                lw[i] = log_kernel(logs.lx[i], logs.l1x[i], a, b);
                if (i != j) lmax = std::max(lmax, lw[i]);
            }
            double num = 0, den = 0;
            for (std::size_t i = 0; i < t; ++i) {
                if (i == j || lw[i] == kNegInf) continue;
                const double w = std::exp(lw[i] - lmax);
                num += w * y[i];
                den += w;
            }
            const double pred = num / den;
            score += (y[j] - pred) * (y[j] - pred);
        }
        result.trace.emplace_back(h, score);
        if (score < best) {  // strict: ties keep the smaller h
            best = score;
            result.h_star = h;
        }
    }
    double lo = result.trace.front().second, hi = lo;
    for (const auto& [h, s] : result.trace) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (hi - lo <= 1e-14 * (1.0 + std::abs(hi))) {
        result.constant_series = true;
        result.h_star = grid.front();
    }
    return result;
}

namespace {

// Modified Gram-Schmidt QR of the polynomial design [1, u, ..., u^dmax];
// returns orthonormal columns q and the upper-triangular r.
struct PolyQr {
    std::vector<std::vector<double>> q;  // (dmax+1) columns of length n
    std::vector<std::vector<double>> r;  // (dmax+1) x (dmax+1)

    PolyQr(std::span<const double> u, int dmax) {
        const std::size_t n = u.size();
        const int cols = dmax + 1;
        q.assign(cols, std::vector<double>(n));
        r.assign(cols, std::vector<double>(cols, 0.0));
        for (int k = 0; k < cols; ++k) {
            auto& v = q[k];
            for (std::size_t i = 0; i < n; ++i) v[i] = k == 0 ? 1.0 : std::pow(u[i], k);
            double norm0 = 0;
            for (double x : v) norm0 += x * x;
            norm0 = std::sqrt(norm0);
            for (int pass = 0; pass < 2; ++pass) {  // re-orthogonalize once
                for (int j = 0; j < k; ++j) {
                    double dot = 0;
                    for (std::size_t i = 0; i < n; ++i) dot += q[j][i] * v[i];
                    r[j][k] += dot;
                    for (std::size_t i = 0; i < n; ++i) v[i] -= dot * q[j][i];
                }
            }
            double norm = 0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm <= 1e-12 * norm0)
                throw NumericError("polyfit: design rank-deficient at degree " +
                                   std::to_string(k) + " (column norm ratio " +
                                   format_double(norm / norm0) + ")");
            r[k][k] = norm;
            for (std::size_t i = 0; i < n; ++i) v[i] /= norm;
        }
    }

    // coefficients of the degree-d fit from theta = q' y
    std::vector<double> coeffs(const std::vector<double>& theta, int d) const {
        std::vector<double> beta(d + 1);
        for (int i = d; i >= 0; --i) {
            double s = theta[i];
            for (int j = i + 1; j <= d; ++j) s -= r[i][j] * beta[j];
            beta[i] = s / r[i][i];
        }
        return beta;
    }
};

}  // namespace

TrendFit polyfit_stepwise(std::span<const double> y, const StepwiseOptions& opt) {
    const auto n = static_cast<std::int64_t>(y.size());
    if (opt.d_max < 1) throw ContractViolation("polyfit: d_max must be >= 1");
    if (n <= opt.d_max + 1)
        throw InsufficientData("polyfit: need more than d_max + 1 points");
    if (!opt.raw.empty() && opt.raw.size() != y.size())
        throw ContractViolation("polyfit: raw series length mismatch");

    TrendFit fit;
    // centered/scaled support index
    const double mean = static_cast<double>(n - 1) / 2.0;
    double ss = 0;
    for (std::int64_t i = 0; i < n; ++i)
        ss += (static_cast<double>(i) - mean) * (static_cast<double>(i) - mean);
    const double scale = std::sqrt(ss / static_cast<double>(n - 1));
    fit.u_mean = mean;
    fit.u_scale = scale;
    std::vector<double> u(y.size());
    for (std::int64_t i = 0; i < n; ++i) u[i] = (static_cast<double>(i) - mean) / scale;

    PolyQr qr(u, opt.d_max);
    std::vector<double> theta(opt.d_max + 1, 0.0);
    for (int k = 0; k <= opt.d_max; ++k)
        for (std::int64_t i = 0; i < n; ++i) theta[k] += qr.q[k][i] * y[i];

    double yy = 0, ysum = 0;
    for (double v : y) {
        yy += v * v;
        ysum += v;
    }
    const double tss = yy - ysum * ysum / static_cast<double>(n);

    std::vector<double> rss(opt.d_max + 1);
    double acc = theta[0] * theta[0];
    for (int d = 1; d <= opt.d_max; ++d) {
        acc += theta[d] * theta[d];
        rss[d] = std::max(0.0, yy - acc);
        DegreeFit df;
        df.degree = d;
        df.coeffs = qr.coeffs(theta, d);
        df.rss = rss[d];
        df.r2 = tss > 0 ? 1.0 - rss[d] / tss : 1.0;
        fit.degrees.push_back(std::move(df));
    }

    if (!opt.day_variance.empty() && opt.day_variance.size() != y.size())
        throw ContractViolation("polyfit: day_variance length mismatch");

    // noise variance for the covariance-aware mode: per-day sampling
    // variances when the caller knows them, otherwise first differences of
    // the raw series (robust to smooth trend)
    fit.covariance_aware = opt.kernel_h.has_value();
    std::span<const double> raw = opt.raw.empty() ? y : std::span<const double>(opt.raw);
    if (fit.covariance_aware) {
        if (!opt.day_variance.empty()) {
            double vsum = 0;
            for (double v : opt.day_variance) vsum += v;
            fit.sigma2 = vsum / static_cast<double>(opt.day_variance.size());
        } else {
            double dss = 0;
            for (std::size_t i = 1; i < raw.size(); ++i)
                dss += (raw[i] - raw[i - 1]) * (raw[i] - raw[i - 1]);
            fit.sigma2 = dss / (2.0 * static_cast<double>(raw.size() - 1));
        }
    }

    // Var(theta_k) = sum_i (W'q_k)_i^2 var_i when testing a smoothed fit
    std::vector<double> theta_var(opt.d_max + 1, fit.sigma2);
    if (fit.covariance_aware) {
        const auto xs = unit_grid(y.size());
        std::vector<std::vector<double>> wtq(opt.d_max + 1, std::vector<double>(y.size(), 0.0));
        for (std::size_t m = 0; m < y.size(); ++m) {
            const auto w = beta_weights(xs, xs[m], *opt.kernel_h);
            for (int k = 0; k <= opt.d_max; ++k)
                for (std::size_t i = 0; i < y.size(); ++i) wtq[k][i] += w[i] * qr.q[k][m];
        }
        for (int k = 0; k <= opt.d_max; ++k) {
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double vi =
                    opt.day_variance.empty() ? fit.sigma2 : opt.day_variance[i];
                s += wtq[k][i] * wtq[k][i] * vi;
            }
            theta_var[k] = s;
        }
    }

    const double fit_floor = 1e-12 * std::max(tss, yy);
    fit.selected = 1;
    for (int d = 1; d < opt.d_max; ++d) {
        double p;
        const double num = theta[d + 1] * theta[d + 1];
        if (rss[d] <= fit_floor) {
            p = 1.0;  // current degree already fits to machine precision
        } else if (fit.covariance_aware) {
            const double var = theta_var[d + 1];
            if (var <= 0) {
                p = num > 0 ? 0.0 : 1.0;
            } else {
                boost::math::fisher_f dist(1, static_cast<double>(n - 1));
                p = boost::math::cdf(boost::math::complement(dist, num / var));
            }
        } else {
            const double dof = static_cast<double>(n - (d + 2));
            const double denom = rss[d + 1] / dof;
            if (denom <= 0) {
                p = num > fit_floor ? 0.0 : 1.0;
            } else {
                boost::math::fisher_f dist(1, dof);
                p = boost::math::cdf(boost::math::complement(dist, num / denom));
            }
        }
        fit.step_pvalues.push_back(p);
        if (p <= opt.alpha)
            fit.selected = d + 1;
        else
            break;
    }
    return fit;
}

TrendFit polyfit_stepwise(const SmoothedSeries& series, int component, int d_max) {
    if (component < 0 || component > 2) throw ContractViolation("polyfit: bad component");
    StepwiseOptions opt;
    opt.d_max = d_max;
    opt.raw = series.raw[component];
    opt.kernel_h = series.h;
    // daily proportions carry a known sampling variance p(1-p)/n
    opt.day_variance.resize(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double p = std::clamp(series.smoothed[component][i], 0.01, 0.99);
        opt.day_variance[i] = p * (1 - p) / static_cast<double>(series.counts[i]);
    }
    return polyfit_stepwise(series.smoothed[component], opt);
}

double eval_poly(const std::vector<double>& coeffs, double u) {
    double v = 0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * u + *it;
    return v;
}

TrendMetrics trend_metrics(const SmoothedSeries& series, const TrendFit& fit, int component) {
    if (component < 0 || component > 2) throw ContractViolation("trend_metrics: bad component");
    if (series.size() < 2) throw InsufficientData("trend_metrics: series too short");

    TrendMetrics m;
    const auto& ys = series.smoothed[component];
    auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
    m.smoothed_min = *mn;
    m.smoothed_max = *mx;

    const auto& coeffs = fit.selected_fit().coeffs;
    const double u_lo = (0.0 - fit.u_mean) / fit.u_scale;
    const double u_hi = (static_cast<double>(series.size() - 1) - fit.u_mean) / fit.u_scale;

    // critical points of the fitted polynomial: bisect sign changes of the
    // derivative over a fine partition, then compare with the endpoints
    std::vector<double> deriv;
    for (std::size_t k = 1; k < coeffs.size(); ++k)
        deriv.push_back(coeffs[k] * static_cast<double>(k));
    std::vector<double> candidates{u_lo, u_hi};
    const int grid_n = 4096;
    double prev_u = u_lo, prev_d = eval_poly(deriv, u_lo);
    for (int g = 1; g <= grid_n; ++g) {
        const double cu = u_lo + (u_hi - u_lo) * static_cast<double>(g) / grid_n;
        const double cd = eval_poly(deriv, cu);
        if ((prev_d <= 0 && cd >= 0) || (prev_d >= 0 && cd <= 0)) {
            double a = prev_u, b = cu, fa = prev_d;
            for (int it = 0; it < 200 && b - a > 1e-16 * (1.0 + std::abs(a)); ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = eval_poly(deriv, mid);
                if ((fa <= 0 && fm <= 0) || (fa >= 0 && fm >= 0)) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            candidates.push_back(0.5 * (a + b));
        }
        prev_u = cu;
        prev_d = cd;
    }
    double best_u = u_lo, best_v = eval_poly(coeffs, u_lo);
    for (double cu : candidates) {
        const double v = eval_poly(coeffs, cu);
        if (v > best_v) {
            best_v = v;
            best_u = cu;
        }
    }
    m.peak_value = best_v;
    m.peak_index = best_u * fit.u_scale + fit.u_mean;
    const auto nearest =
        std::clamp<std::int64_t>(std::llround(m.peak_index), 0,
                                 static_cast<std::int64_t>(series.size()) - 1);
    m.peak_date = series.dates[static_cast<std::size_t>(nearest)];
    m.end_value = eval_poly(coeffs, u_hi);
    m.decline = m.end_value - m.peak_value;
    return m;
}

std::string TrendFit::to_json() const {
    nlohmann::json j;
    j["selected_degree"] = selected;
    j["u_mean"] = u_mean;
    j["u_scale"] = u_scale;
    j["covariance_aware"] = covariance_aware;
    if (covariance_aware) j["sigma2"] = sigma2;
    j["step_pvalues"] = step_pvalues;
    j["degrees"] = nlohmann::json::array();
    for (const auto& d : degrees)
        j["degrees"].push_back({{"degree", d.degree}, {"coeffs", d.coeffs}, {"r2", d.r2},
                                {"rss", d.rss}});
    return j.dump(2);
}

void write_smoothed_csv(std::ostream& out, const SmoothedSeries& series) {
    out << "date,pF_s,pC_s,pU_s\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << series.dates[i].to_string() << ',' << format_double(series.smoothed[0][i]) << ','
            << format_double(series.smoothed[1][i]) << ','
            << format_double(series.smoothed[2][i]) << '\n';
    }
}

std::string smooth_meta_json(const SmoothedSeries& series, const CvResult* cv) {
    nlohmann::json j;
    j["h"] = series.h;
    j["support_days"] = series.size();
    if (cv) {
        j["cv"] = {{"h_star", cv->h_star}, {"constant_series", cv->constant_series}};
        auto& trace = j["cv"]["trace"] = nlohmann::json::array();
        for (const auto& [h, score] : cv->trace) trace.push_back({{"h", h}, {"score", score}});
    }
    return j.dump(2);
}

std::string trend_metrics_json(const TrendMetrics& m) {
    nlohmann::json j;
    j["smoothed_min"] = m.smoothed_min;
    j["smoothed_max"] = m.smoothed_max;
    j["peak_index"] = m.peak_index;
    j["peak_date"] = m.peak_date.to_string();
    j["peak_value"] = m.peak_value;
    j["end_value"] = m.end_value;
    j["decline"] = m.decline;
    return j.dump(2);
}

}  // namespace vaxpulse::smooth
