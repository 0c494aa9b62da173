#include "meerkit/audio.hpp"
#include "meerkit/dsp.hpp"
#include "meerkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>

namespace meerkit::audio {

namespace {

// Zero crossings of the low-pass sinc kept on each side of the centre tap.
constexpr int kZeroCrossings = 32;
// Roughly 85 dB of sidelobe attenuation.
constexpr double kKaiserBeta = 8.6;
constexpr double kCutoffFraction = 0.95;
// Above this many phases taps are computed per output sample instead of cached.
constexpr std::int64_t kMaxCachedPhases = 4096;

class PolyphaseKernel {
public:
    PolyphaseKernel(int source_rate, int target_rate) {
        const std::int64_t g = std::gcd(source_rate, target_rate);
        up_ = target_rate / g;
        down_ = source_rate / g;
        const double nyquist = 0.5 * std::min(source_rate, target_rate);
        cutoff_ = kCutoffFraction * nyquist / source_rate;  // cycles per input sample
        half_width_ = kZeroCrossings / (2.0 * cutoff_);
        taps_per_side_ = static_cast<std::int64_t>(std::ceil(half_width_));
        if (up_ <= kMaxCachedPhases) {
            table_.resize(static_cast<std::size_t>(up_));
            for (std::int64_t p = 0; p < up_; ++p) table_[p] = taps_for_phase(p);
        }
    }

    std::int64_t up() const { return up_; }
    std::int64_t down() const { return down_; }
    std::int64_t taps_per_side() const { return taps_per_side_; }

    /// Taps for input indices base - taps_per_side + 1 ... base + taps_per_side.
    std::vector<double> taps(std::int64_t phase) const {
        if (!table_.empty()) return table_[static_cast<std::size_t>(phase)];
        return taps_for_phase(phase);
    }

    const std::vector<double>* cached(std::int64_t phase) const {
        return table_.empty() ? nullptr : &table_[static_cast<std::size_t>(phase)];
    }

private:
    std::vector<double> taps_for_phase(std::int64_t phase) const {
        const double frac = static_cast<double>(phase) / static_cast<double>(up_);
        std::vector<double> h(static_cast<std::size_t>(2 * taps_per_side_));
        double sum = 0.0;
        for (std::int64_t j = 0; j < 2 * taps_per_side_; ++j) {
            const double tau = frac + static_cast<double>(taps_per_side_ - 1 - j);
            const double x = 2.0 * cutoff_ * tau;
            const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
            const double v = 2.0 * cutoff_ * sinc * dsp::kaiser(tau / half_width_, kKaiserBeta);
            h[static_cast<std::size_t>(j)] = v;
            sum += v;
        }
        // Unity DC gain for every phase.
        for (double& v : h) v /= sum;
        return h;
    }

    std::int64_t up_ = 1;
    std::int64_t down_ = 1;
    double cutoff_ = 0.5;
    double half_width_ = 1.0;
    std::int64_t taps_per_side_ = 1;
    std::vector<std::vector<double>> table_;
};

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate_hz) {
    if (target_rate_hz <= 0) throw invalid_argument("target sample rate must be positive");
    if (clip.sample_rate_hz <= 0) throw invalid_argument("clip sample rate must be positive");
    if (clip.sample_rate_hz == target_rate_hz) return clip;

    const PolyphaseKernel kernel(clip.sample_rate_hz, target_rate_hz);
    const auto n_in = static_cast<std::int64_t>(clip.samples.size());
    const std::int64_t n_out =
        (2 * n_in * target_rate_hz + clip.sample_rate_hz) / (2 * static_cast<std::int64_t>(clip.sample_rate_hz));

    AudioClip out;
    out.call_id = clip.call_id;
    out.sample_rate_hz = target_rate_hz;
    out.samples.resize(static_cast<std::size_t>(n_out));
    const std::int64_t side = kernel.taps_per_side();
    std::vector<double> scratch;
    for (std::int64_t n = 0; n < n_out; ++n) {
        const std::int64_t pos = n * kernel.down();
        const std::int64_t base = pos / kernel.up();
        const std::int64_t phase = pos % kernel.up();
        const std::vector<double>* taps = kernel.cached(phase);
        if (taps == nullptr) {
            scratch = kernel.taps(phase);
            taps = &scratch;
        }
        const std::int64_t first = base - side + 1;
        const std::int64_t lo = std::max<std::int64_t>(0, first);
        const std::int64_t hi = std::min<std::int64_t>(n_in, base + side + 1);
        double acc = 0.0;
        for (std::int64_t k = lo; k < hi; ++k)
            acc += (*taps)[static_cast<std::size_t>(k - first)] * clip.samples[static_cast<std::size_t>(k)];
        out.samples[static_cast<std::size_t>(n)] = std::clamp(acc, -1.0, 1.0);
    }
    return out;
}

std::size_t min_samples_for(double min_ms, int sample_rate_hz) {
    // Snap values within rounding noise of an integer before taking the ceiling.
    const double exact = min_ms * sample_rate_hz / 1000.0;
    const double nearest = std::round(exact);
    if (std::abs(exact - nearest) < 1e-9) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(exact));
}

std::size_t replication_factor(std::size_t length, double min_ms, int sample_rate_hz) {
    const std::size_t need = min_samples_for(min_ms, sample_rate_hz);
    if (length == 0) throw invalid_argument("cannot replicate an empty clip");
    if (length >= need) return 1;
    return (need + length - 1) / length;
}

AudioClip enforce_min_duration(const AudioClip& clip, double min_ms) {
    if (!(min_ms > 0.0)) throw invalid_argument("minimum duration must be positive");
    const std::size_t copies = replication_factor(clip.samples.size(), min_ms, clip.sample_rate_hz);
    if (copies == 1) return clip;
    AudioClip out;
    out.call_id = clip.call_id;
    out.sample_rate_hz = clip.sample_rate_hz;
    out.samples.reserve(clip.samples.size() * copies);
    for (std::size_t c = 0; c < copies; ++c)
        out.samples.insert(out.samples.end(), clip.samples.begin(), clip.samples.end());
    return out;
}

}  // namespace meerkit::audio
