#include "meerkit/dsp.hpp"
#include "meerkit/rng.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace meerkit {

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Marsaglia polar method.
    double u, v, s;
    do {
        u = uniform(-1.0, 1.0);
        v = uniform(-1.0, 1.0);
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

}  // namespace meerkit

namespace meerkit::dsp {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace {

void transform(std::span<Complex> a, bool inverse) {
    const std::size_t n = a.size();
    if (n < 2) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        // Twiddles from exact angles rather than repeated multiplication.
        for (std::size_t k = 0; k < half; ++k) {
            const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                                 static_cast<double>(len);
            const Complex w(std::cos(angle), std::sin(angle));
            for (std::size_t i = k; i < n; i += len) {
                const Complex t = w * a[i + half];
                a[i + half] = a[i] - t;
                a[i] += t;
            }
        }
    }
}

}  // namespace

void fft(std::span<Complex> data) { transform(data, false); }

void ifft(std::span<Complex> data) {
    transform(data, true);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
}

double bessel_i0(double x) {
    // Power series; converges quickly for the beta range used by Kaiser windows.
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * static_cast<double>(k));
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

double kaiser(double t, double beta) {
    if (t < -1.0 || t > 1.0) return 0.0;
    return bessel_i0(beta * std::sqrt(1.0 - t * t)) / bessel_i0(beta);
}

}  // namespace meerkit::dsp
