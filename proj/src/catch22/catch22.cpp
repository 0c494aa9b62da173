// Native catch22 characteristics. Each function mirrors the numerical
// semantics of the reference C implementation (bin assignment by truncation,
// first-crossing searches, integer arithmetic on lags) so that outputs agree
// to rounding error. Inputs to the 22 characteristics are z-scored first.

#include "meerkit/catch22.hpp"
#include "meerkit/dsp.hpp"
#include "meerkit/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace meerkit::catch22 {

namespace {

using Span = std::span<const double>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean(Span a) {
    double m = 0.0;
    for (double v : a) m += v;
    return m / static_cast<double>(a.size());
}

double stddev(Span a) {
    const double m = mean(a);
    double s = 0.0;
    for (double v : a) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(a.size() - 1));
}

double median(std::vector<double> b) {
    std::sort(b.begin(), b.end());
    const std::size_t n = b.size();
    if (n % 2 == 1) return b[n / 2];
    return (b[n / 2] + b[n / 2 - 1]) / 2.0;
}

bool is_constant(Span y) {
    return std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
}

struct LinearFit {
    double m = 0.0;
    double b = 0.0;
};

LinearFit linreg(Span x, Span y) {
    double sx = 0.0, sx2 = 0.0, sxy = 0.0, sy = 0.0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sx2 += x[i] * x[i];
        sxy += x[i] * y[i];
        sy += y[i];
    }
    const double dn = static_cast<double>(n);
    const double denom = dn * sx2 - sx * sx;
    if (denom == 0.0) return {};
    return {(dn * sxy - sx * sy) / denom, (sy * sx2 - sx * sxy) / denom};
}

double quantile(const std::vector<double>& sorted, double q) {
    const double n = static_cast<double>(sorted.size());
    const double lim = 0.5 / n;
    if (q < lim) return sorted.front();
    if (q > 1.0 - lim) return sorted.back();
    const double idx = n * q - 0.5;
    const double left = std::floor(idx);
    const double right = std::ceil(idx);
    const double lv = sorted[static_cast<std::size_t>(left)];
    const double rv = sorted[static_cast<std::size_t>(right)];
    // An exact hit leaves 0/0 here, matching the reference arithmetic.
    return lv + (idx - left) * (rv - lv) / (right - left);
}

/// Labels 1..groups by quantile thresholds.
std::vector<int> coarse_grain(Span y, int groups) {
    std::vector<double> sorted(y.begin(), y.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> th(groups + 1);
    const double step = 1.0 / groups;
    double t = 0.0;
    for (int i = 0; i <= groups; ++i) {
        th[i] = quantile(sorted, t);
        t += step;
    }
    th[0] -= 1.0;
    std::vector<int> labels(y.size(), 0);
    for (int i = 0; i < groups; ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
            if (y[j] > th[i] && y[j] <= th[i + 1]) labels[j] = i + 1;
    return labels;
}

struct Histogram {
    std::vector<int> counts;
    std::vector<double> edges;
};

Histogram histcounts(Span y, int bins) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const double min = *lo;
    const double step = (*hi - min) / bins;
    Histogram h;
    h.counts.assign(bins, 0);
    for (double v : y) {
        // C-style truncation; NaN (zero range) lands in bin 0 as the reference does on x86.
        const double q = (v - min) / step;
        int idx = std::isnan(q) ? 0 : static_cast<int>(std::clamp(q, -1.0, static_cast<double>(bins)));
        idx = std::clamp(idx, 0, bins - 1);
        ++h.counts[idx];
    }
    h.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i) h.edges[i] = i * step + min;
    return h;
}

/// Normalised autocorrelation at every lag (array is zero-padded past size).
std::vector<double> autocorrs(Span y) {
    const std::size_t n_fft = dsp::next_pow2(y.size()) << 1;
    const double m = mean(y);
    std::vector<dsp::Complex> f(n_fft);
    for (std::size_t i = 0; i < y.size(); ++i) f[i] = {y[i] - m, 0.0};
    dsp::fft(f);
    for (auto& c : f) c = {std::norm(c), 0.0};
    dsp::ifft(f);
    std::vector<double> out(n_fft);
    const double d = f[0].real();
    for (std::size_t i = 0; i < n_fft; ++i) out[i] = f[i].real() / d;
    return out;
}

int first_zero(Span y, int max_tau) {
    const auto ac = autocorrs(y);
    int idx = 0;
    while (ac[idx] > 0 && idx < max_tau) ++idx;
    return idx;
}

double pearson(Span x, Span y) {
    const double mx = mean(x), my = mean(y);
    double nom = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        nom += (x[i] - mx) * (y[i] - my);
        dx += (x[i] - mx) * (x[i] - mx);
        dy += (y[i] - my) * (y[i] - my);
    }
    return nom / std::sqrt(dx * dy);
}

double entropy(std::span<const double> p) {
    double f = 0.0;
    for (double a : p)
        if (a > 0) f += a * std::log(a);
    return -f;
}

// ---------------------------------------------------------------------------

double histogram_mode(Span y, int bins) {
    const Histogram h = histcounts(y, bins);
    double max_count = 0.0;
    int ties = 1;
    double out = 0.0;
    for (int i = 0; i < bins; ++i) {
        const double centre = (h.edges[i] + h.edges[i + 1]) * 0.5;
        if (h.counts[i] > max_count) {
            max_count = h.counts[i];
            ties = 1;
            out = centre;
        } else if (h.counts[i] == max_count) {
            ++ties;
            out += centre;
        }
    }
    return out / ties;
}

double f1ecac(Span y, const std::vector<double>& ac) {
    const double thresh = 1.0 / std::exp(1.0);
    const int n = static_cast<int>(y.size());
    for (int i = 0; i < n - 2; ++i) {
        if (ac[i + 1] < thresh) return i + (thresh - ac[i]) / (ac[i + 1] - ac[i]);
    }
    return n;
}

double first_min_ac(Span y, const std::vector<double>& ac) {
    const int n = static_cast<int>(y.size());
    for (int i = 1; i < n - 1; ++i)
        if (ac[i] < ac[i - 1] && ac[i] < ac[i + 1]) return i;
    return n;
}

double histogram_ami_even_2_5(Span y) {
    constexpr int tau = 2;
    constexpr int bins = 5;
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const double step = (*hi - *lo + 0.2) / bins;
    double edges[bins + 1];
    for (int i = 0; i <= bins; ++i) edges[i] = *lo + step * i - 0.1;
    auto assign = [&](double v) {
        for (int j = 0; j <= bins; ++j)
            if (v < edges[j]) return j;
        return 0;
    };
    const std::size_t m = y.size() - tau;
    double joint[bins][bins] = {};
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const int a = assign(y[i]);
        const int b = assign(y[i + tau]);
        // Pairs that fall outside the 1..5 grid are ignored, as in the reference.
        if (a < 1 || b < 1) continue;
        joint[b - 1][a - 1] += 1.0;
        total += 1.0;
    }
    double pi[bins] = {}, pj[bins] = {};
    for (int i = 0; i < bins; ++i)
        for (int j = 0; j < bins; ++j) {
            joint[i][j] /= total;
            pi[i] += joint[i][j];
            pj[j] += joint[i][j];
        }
    double ami = 0.0;
    for (int i = 0; i < bins; ++i)
        for (int j = 0; j < bins; ++j)
            if (joint[i][j] > 0) ami += joint[i][j] * std::log(joint[i][j] / (pj[j] * pi[i]));
    return ami;
}

double trev_1_num(Span y) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < y.size(); ++i) s += std::pow(y[i + 1] - y[i], 3);
    return s / static_cast<double>(y.size() - 1);
}

double hrv_pnn40(Span y) {
    double count = 0.0;
    for (std::size_t i = 0; i + 1 < y.size(); ++i)
        if (std::abs(y[i + 1] - y[i]) * 1000 > 40) count += 1.0;
    return count / static_cast<double>(y.size() - 1);
}

double binary_mean_longstretch1(Span y) {
    const int n = static_cast<int>(y.size());
    const double m = mean(y);
    int longest = 0, last = 0;
    for (int i = 0; i < n - 1; ++i) {
        const bool above = y[i] - m > 0;
        if (!above || i == n - 2) {
            longest = std::max(longest, i - last);
            last = i;
        }
    }
    return longest;
}

double binary_diff_longstretch0(Span y) {
    const int n = static_cast<int>(y.size());
    int longest = 0, last = 0;
    for (int i = 0; i < n - 1; ++i) {
        const bool rising = !(y[i + 1] - y[i] < 0);
        if (rising || i == n - 2) {
            longest = std::max(longest, i - last);
            last = i;
        }
    }
    return longest;
}

double transition_matrix_3ac_sumdiagcov(Span y) {
    if (is_constant(y)) return kNaN;
    const int n = static_cast<int>(y.size());
    const int tau = first_zero(y, n);
    const int n_down = (n - 1) / tau + 1;
    std::vector<double> down(n_down);
    for (int i = 0; i < n_down; ++i) down[i] = y[static_cast<std::size_t>(i) * tau];
    const auto labels = coarse_grain(down, 3);
    double t[3][3] = {};
    for (int j = 0; j < n_down - 1; ++j) t[labels[j] - 1][labels[j + 1] - 1] += 1.0;
    for (auto& row : t)
        for (double& v : row) v /= (n_down - 1);
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double col[3] = {t[0][c], t[1][c], t[2][c]};
        const double m = (col[0] + col[1] + col[2]) / 3.0;
        double v = 0.0;
        for (double x : col) v += (x - m) * (x - m);
        sum += v / 2.0;
    }
    return sum;
}

// Least-squares cubic spline with breaks at 0, floor(n/2)-1 and n-1.
std::vector<double> spline_detrend(Span y) {
    const int n = static_cast<int>(y.size());
    const double last = n - 1;
    const double knot = std::floor(n / 2.0) - 1.0;
    const double uk = knot / last;
    Eigen::MatrixXd basis(n, 5);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        const double u = i / last;
        const double v = std::max(0.0, u - uk);
        basis(i, 0) = 1.0;
        basis(i, 1) = u;
        basis(i, 2) = u * u;
        basis(i, 3) = u * u * u;
        basis(i, 4) = v * v * v;
        rhs(i) = y[i];
    }
    const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd fit = basis * coef;
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = y[i] - fit(i);
    return out;
}

double periodicity_wang_th0_01(Span y) {
    constexpr double th = 0.01;
    const auto z = spline_detrend(y);
    const int n = static_cast<int>(z.size());
    const int acmax = static_cast<int>(std::ceil(n / 3.0));
    std::vector<double> acf(acmax);
    auto fill = [&](int lo_tau, int hi_tau) {
        for (int tau = lo_tau; tau <= hi_tau; ++tau) {
            const int m = n - tau;
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += z[i] * z[i + tau];
            acf[tau - 1] = acc / m;
        }
    };
    // Lags are evaluated lazily in blocks because the first qualifying peak
    // usually appears early.
    constexpr int kBlock = 256;
    std::vector<int> troughs;
    int trough_idx = -1;
    int have = 0;
    int next_i = 1;
    while (have < acmax) {
        const int upto = std::min(acmax, have + kBlock);
        fill(have + 1, upto);
        have = upto;
        for (int i = next_i; i <= have - 2; ++i) {
            const double slope_in = acf[i] - acf[i - 1];
            const double slope_out = acf[i + 1] - acf[i];
            if (slope_in < 0 && slope_out > 0) {
                troughs.push_back(i);
            } else if (slope_in > 0 && slope_out < 0) {
                while (trough_idx + 1 < static_cast<int>(troughs.size()) && troughs[trough_idx + 1] < i)
                    ++trough_idx;
                if (trough_idx == -1) continue;
                const double peak = acf[i];
                if (peak - acf[troughs[trough_idx]] < th) continue;
                if (peak < 0) continue;
                return i;
            }
        }
        next_i = std::max(next_i, have - 1);
    }
    return 0;
}

double embed2_dist_expfit_meandiff(Span y) {
    const int n = static_cast<int>(y.size());
    int tau = first_zero(y, n);
    if (tau > n / 10.0) tau = static_cast<int>(std::floor(n / 10.0));
    const int m = n - tau - 1;
    std::vector<double> d(m);
    for (int i = 0; i < m; ++i) {
        const double a = y[i + 1] - y[i];
        const double b = y[i + tau] - y[i + tau + 1];
        d[i] = std::sqrt(a * a + b * b);
        if (std::isnan(d[i])) return kNaN;
    }
    const double l = mean(d);
    const double sd = stddev(d);
    if (sd < 0.001) return 0.0;
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    const int bins = static_cast<int>(std::ceil((*hi - *lo) / (3.5 * sd / std::pow(m, 1.0 / 3.0))));
    if (bins == 0) return 0.0;
    const Histogram h = histcounts(d, bins);
    double sum = 0.0;
    for (int i = 0; i < bins; ++i) {
        const double norm_count = static_cast<double>(h.counts[i]) / m;
        double expf = std::exp(-(h.edges[i] + h.edges[i + 1]) * 0.5 / l) / l;
        if (expf < 0) expf = 0;
        sum += std::abs(norm_count - expf);
    }
    return sum / bins;
}

double auto_mutual_info_fmmi(Span y) {
    const int n = static_cast<int>(y.size());
    const int tau = std::min(40, (n + 1) / 2);
    if (tau < 3) return tau;
    auto ami = [&](int lag) {
        const double ac = pearson(y.first(n - lag), y.subspan(lag));
        return -0.5 * std::log(1.0 - ac * ac);
    };
    double prev = ami(1);
    double curr = ami(2);
    for (int i = 1; i < tau - 1; ++i) {
        const double next = ami(i + 2);
        if (curr < prev && curr < next) return i;
        prev = curr;
        curr = next;
    }
    return tau;
}

double local_simple_mean1_tauresrat(Span y) {
    const int n = static_cast<int>(y.size());
    std::vector<double> res(n - 1);
    for (int i = 0; i < n - 1; ++i) res[i] = y[i + 1] - y[i] / 1.0;
    const double res_zero = first_zero(res, n - 1);
    const double y_zero = first_zero(y, n);
    return res_zero / y_zero;
}

double local_simple_mean3_stderr(Span y) {
    const int n = static_cast<int>(y.size());
    std::vector<double> res(n - 3);
    for (int i = 0; i < n - 3; ++i) res[i] = y[i + 3] - (y[i] + y[i + 1] + y[i + 2]) / 3.0;
    return stddev(res);
}

double outlier_include_001_mdrmd(Span y, double sign) {
    constexpr double inc = 0.01;
    const int n = static_cast<int>(y.size());
    if (is_constant(y)) return 0.0;
    std::vector<double> work(n);
    int tot = 0;
    for (int i = 0; i < n; ++i) {
        work[i] = sign * y[i];
        if (work[i] >= 0) ++tot;
    }
    const double max_val = *std::max_element(work.begin(), work.end());
    if (max_val < inc) return 0.0;
    const int n_thresh = static_cast<int>(max_val / inc + 1);

    // Highest threshold index each sample reaches, from the same `>= j*inc` test.
    std::vector<int> level(n);
    for (int i = 0; i < n; ++i) {
        const double v = work[i];
        const double q = v / inc;
        int j = q >= n_thresh - 1 ? n_thresh - 1 : (q < 0 ? -1 : static_cast<int>(q));
        while (j + 1 < n_thresh && v >= (j + 1) * inc) ++j;
        while (j >= 0 && v < j * inc) --j;
        level[i] = j;
    }
    std::vector<int> count(n_thresh, 0);
    for (int v : level)
        for (int j = 0; j <= v; ++j) ++count[j];

    int mj = 0;
    for (int j = 0; j < n_thresh; ++j)
        if ((count[j] - 1) * 100.0 / tot > 2) mj = j;
    int fbi = n_thresh - 1;
    for (int j = n_thresh - 1; j >= 0; --j)
        if (count[j] - 1 == 0) fbi = j;
    const int trim = std::min(mj, fbi);

    const double half = n / 2.0;
    std::vector<double> medians(trim + 1);
    std::vector<double> positions;
    for (int j = 0; j <= trim; ++j) {
        positions.clear();
        for (int i = 0; i < n; ++i)
            if (level[i] >= j) positions.push_back(i + 1.0);
        const std::size_t m = positions.size();
        const double med = m % 2 == 1 ? positions[m / 2] : (positions[m / 2] + positions[m / 2 - 1]) / 2.0;
        medians[j] = med / half - 1;
    }
    return median(std::move(medians));
}

struct WelchSummary {
    double centroid = 0.0;
    double area_5_1 = 0.0;
};

WelchSummary welch_rect(Span y) {
    // The reference hard-codes this rounded value of pi.
    constexpr double kRefPi = 3.14159265359;
    const std::size_t n = y.size();
    const std::size_t n_fft = dsp::next_pow2(n);
    const double m = mean(y);
    std::vector<dsp::Complex> f(n_fft);
    for (std::size_t i = 0; i < n; ++i) f[i] = {y[i] - m, 0.0};
    dsp::fft(f);
    const double kmu = static_cast<double>(n);
    const std::size_t n_out = n_fft / 2 + 1;
    const double df = 1.0 / static_cast<double>(n_fft);
    std::vector<double> w(n_out), sw(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
        double p = std::norm(f[i]) / kmu;
        if (i > 0 && i < n_out - 1) p *= 2;
        w[i] = 2 * kRefPi * (static_cast<double>(i) * df);
        sw[i] = p / (2 * kRefPi);
        if (std::isinf(sw[i])) return {};
    }
    const double dw = w[1] - w[0];
    std::vector<double> cs(n_out);
    cs[0] = sw[0];
    for (std::size_t i = 1; i < n_out; ++i) cs[i] = sw[i] + cs[i - 1];
    WelchSummary s;
    const double half = cs.back() * 0.5;
    for (std::size_t i = 0; i < n_out; ++i) {
        if (cs[i] > half) {
            s.centroid = w[i];
            break;
        }
    }
    double area = 0.0;
    for (std::size_t i = 0; i < n_out / 5; ++i) area += sw[i];
    s.area_5_1 = area * dw;
    return s;
}

double motif_three_quantile_hh(Span y) {
    const int n = static_cast<int>(y.size());
    const auto yt = coarse_grain(y, 3);
    double counts[3][3] = {};
    // The final sample has no successor and is excluded from its symbol's list.
    for (int i = 0; i < n - 1; ++i) {
        const int a = yt[i];
        const int b = yt[i + 1];
        if (a >= 1 && b >= 1) counts[a - 1][b - 1] += 1.0;
    }
    double hh = 0.0;
    for (auto& row : counts) {
        double p[3];
        for (int j = 0; j < 3; ++j) p[j] = row[j] / (static_cast<double>(n) - 1.0);
        hh += entropy(p);
    }
    return hh;
}

double fluct_anal_prop_r1(Span y, int lag, bool dfa) {
    const int size = static_cast<int>(y.size());
    constexpr int kSteps = 50;
    const double lin_low = std::log(5.0);
    const double lin_high = std::log(static_cast<double>(size / 2));
    const double tau_step = (lin_high - lin_low) / (kSteps - 1);
    int tau[kSteps];
    for (int i = 0; i < kSteps; ++i) tau[i] = static_cast<int>(std::round(std::exp(lin_low + i * tau_step)));
    int n_tau = kSteps;
    for (int i = 0; i < kSteps - 1; ++i) {
        while (tau[i] == tau[i + 1] && i < n_tau - 1) {
            for (int j = i + 1; j < kSteps - 1; ++j) tau[j] = tau[j + 1];
            --n_tau;
        }
    }
    if (n_tau < 12) return 0.0;

    const int size_cs = size / lag;
    std::vector<double> cs(size_cs);
    cs[0] = y[0];
    for (int i = 0; i < size_cs - 1; ++i) cs[i + 1] = cs[i] + y[static_cast<std::size_t>(i + 1) * lag];

    std::vector<double> log_t(n_tau), log_f(n_tau);
    for (int i = 0; i < n_tau; ++i) {
        const int t = tau[i];
        const int n_buffer = size_cs / t;
        double sx = 0.0, sx2 = 0.0;
        for (int k = 0; k < t; ++k) {
            const double xv = k + 1.0;
            sx += xv;
            sx2 += xv * xv;
        }
        const double denom = t * sx2 - sx * sx;
        double fi = 0.0;
        for (int j = 0; j < n_buffer; ++j) {
            const double* w = cs.data() + static_cast<std::size_t>(j) * t;
            double sxy = 0.0, sy = 0.0;
            for (int k = 0; k < t; ++k) {
                sxy += (k + 1.0) * w[k];
                sy += w[k];
            }
            double m = 0.0, b = 0.0;
            if (denom != 0.0) {
                m = (t * sxy - sx * sy) / denom;
                b = (sy * sx2 - sx * sxy) / denom;
            }
            if (dfa) {
                for (int k = 0; k < t; ++k) {
                    const double r = w[k] - (m * (k + 1) + b);
                    fi += r * r;
                }
            } else {
                double mx = w[0] - (m + b), mn = mx;
                for (int k = 1; k < t; ++k) {
                    const double r = w[k] - (m * (k + 1) + b);
                    mx = std::max(mx, r);
                    mn = std::min(mn, r);
                }
                fi += (mx - mn) * (mx - mn);
            }
        }
        const double f = dfa ? std::sqrt(fi / (n_buffer * t)) : std::sqrt(fi / n_buffer);
        log_t[i] = std::log(static_cast<double>(t));
        log_f[i] = std::log(f);
    }

    constexpr int kMinPoints = 6;
    const int ntt = n_tau;
    std::vector<double> sserr;
    for (int i = kMinPoints; i < ntt - kMinPoints + 1; ++i) {
        const Span lt(log_t), lf(log_f);
        const auto f1 = linreg(lt.first(i), lf.first(i));
        const auto f2 = linreg(lt.subspan(i - 1), lf.subspan(i - 1));
        double e1 = 0.0, e2 = 0.0;
        for (int j = 0; j < i; ++j) {
            const double r = log_t[j] * f1.m + f1.b - log_f[j];
            e1 += r * r;
        }
        for (int j = i - 1; j < ntt; ++j) {
            const double r = log_t[j] * f2.m + f2.b - log_f[j];
            e2 += r * r;
        }
        sserr.push_back(std::sqrt(e1) + std::sqrt(e2));
    }
    double minimum = std::numeric_limits<double>::max();
    for (double v : sserr) minimum = std::min(minimum, v);
    double first_min = 0.0;
    for (std::size_t i = 0; i < sserr.size(); ++i) {
        if (sserr[i] == minimum) {
            first_min = static_cast<double>(i) + kMinPoints - 1;
            break;
        }
    }
    return (first_min + 1) / ntt;
}

}  // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "DN_HistogramMode_5",
        "DN_HistogramMode_10",
        "CO_f1ecac",
        "CO_FirstMin_ac",
        "CO_HistogramAMI_even_2_5",
        "CO_trev_1_num",
        "MD_hrv_classic_pnn40",
        "SB_BinaryStats_mean_longstretch1",
        "SB_TransitionMatrix_3ac_sumdiagcov",
        "PD_PeriodicityWang_th0_01",
        "CO_Embed2_Dist_tau_d_expfit_meandiff",
        "IN_AutoMutualInfoStats_40_gaussian_fmmi",
        "FC_LocalSimple_mean1_tauresrat",
        "DN_OutlierInclude_p_001_mdrmd",
        "DN_OutlierInclude_n_001_mdrmd",
        "SP_Summaries_welch_rect_area_5_1",
        "SB_BinaryStats_diff_longstretch0",
        "SB_MotifThree_quantile_hh",
        "SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1",
        "SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1",
        "SP_Summaries_welch_rect_centroid",
        "FC_LocalSimple_mean3_stderr",
        "DN_Mean",
        "DN_Spread_Std",
    };
    return names;
}

std::array<double, kFeatureCount> compute_catch24_raw(std::span<const double> series) {
    if (series.size() < kMinLength)
        throw data_error("catch24 needs at least " + std::to_string(kMinLength) + " samples, got " +
                         std::to_string(series.size()));
    for (double v : series)
        if (!std::isfinite(v)) throw data_error("catch24 input contains a non-finite value");

    std::array<double, kFeatureCount> out{};
    out[22] = mean(series);
    out[23] = stddev(series);

    std::vector<double> z(series.size());
    const double m = out[22];
    const double sd = out[23];
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (series[i] - m) / sd;
    const Span y(z);

    if (sd == 0.0) {
        // z is all NaN: each characteristic takes the value its reference
        // counterpart reports for NaN input.
        out.fill(kNaN);
        out[2] = 0.0;   // CO_f1ecac
        out[3] = 0.0;   // CO_FirstMin_ac
        out[9] = 0.0;   // PD_PeriodicityWang
        out[22] = m;
        out[23] = sd;
        return out;
    }

    const auto ac = autocorrs(y);
    const WelchSummary welch = welch_rect(y);
    out[0] = histogram_mode(y, 5);
    out[1] = histogram_mode(y, 10);
    out[2] = f1ecac(y, ac);
    out[3] = first_min_ac(y, ac);
    out[4] = histogram_ami_even_2_5(y);
    out[5] = trev_1_num(y);
    out[6] = hrv_pnn40(y);
    out[7] = binary_mean_longstretch1(y);
    out[8] = transition_matrix_3ac_sumdiagcov(y);
    out[9] = periodicity_wang_th0_01(y);
    out[10] = embed2_dist_expfit_meandiff(y);
    out[11] = auto_mutual_info_fmmi(y);
    out[12] = local_simple_mean1_tauresrat(y);
    out[13] = outlier_include_001_mdrmd(y, 1.0);
    out[14] = outlier_include_001_mdrmd(y, -1.0);
    out[15] = welch.area_5_1;
    out[16] = binary_diff_longstretch0(y);
    out[17] = motif_three_quantile_hh(y);
    out[18] = fluct_anal_prop_r1(y, 1, false);
    out[19] = fluct_anal_prop_r1(y, 2, true);
    out[20] = welch.centroid;
    out[21] = local_simple_mean3_stderr(y);
    return out;
}

Catch24Vector compute_catch24(std::span<const double> series) {
    Catch24Vector v;
    v.values = compute_catch24_raw(series);
    for (double& x : v.values)
        if (!std::isfinite(x)) x = 0.0;
    return v;
}

}  // namespace meerkit::catch22
