#include "meerkit/cnn.hpp"
#include "meerkit/dsp.hpp"
#include "meerkit/error.hpp"
#include "meerkit/metrics.hpp"
#include "meerkit/rng.hpp"
#include "../common/parallel.hpp"
#include "../common/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace meerkit::cnn {

namespace {

std::size_t conv_out(std::size_t in, const ConvSpec& s) {
    if (in < static_cast<std::size_t>(s.kernel)) return 0;
    return (in - static_cast<std::size_t>(s.kernel)) / static_cast<std::size_t>(s.stride) + 1;
}

std::size_t pool_out(std::size_t in) {
    if (in == 0) return 0;
    if (in < static_cast<std::size_t>(kPoolSize)) return 1;
    return (in - kPoolSize) / kPoolStride + 1;
}

struct Offsets {
    std::size_t w1, b1, w2, b2, w3, b3, wh, bh, wo, bo, total;
};

Offsets offsets(int n_classes) {
    Offsets o{};
    std::size_t at = 0;
    auto take = [&](std::size_t n) {
        const std::size_t start = at;
        at += n;
        return start;
    };
    o.w1 = take(std::size_t(kConv1.filters) * 1 * kConv1.kernel);
    o.b1 = take(kConv1.filters);
    o.w2 = take(std::size_t(kConv2.filters) * kConv1.filters * kConv2.kernel);
    o.b2 = take(kConv2.filters);
    o.w3 = take(std::size_t(kConv3.filters) * kConv2.filters * kConv3.kernel);
    o.b3 = take(kConv3.filters);
    o.wh = take(std::size_t(kHiddenUnits) * kConv3.filters);
    o.bh = take(kHiddenUnits);
    o.wo = take(std::size_t(n_classes) * kHiddenUnits);
    o.bo = take(static_cast<std::size_t>(n_classes));
    o.total = at;
    return o;
}

/// Valid (unpadded) convolution followed by ReLU, channel-major buffers.
void conv_relu(const double* in, std::size_t in_ch, std::size_t in_frames, const double* w, const double* b,
               const ConvSpec& s, std::size_t out_frames, double* out) {
    const std::size_t K = s.kernel, stride = s.stride;
    if (in_ch == 1) {
        for (std::size_t t = 0; t < out_frames; ++t) {
            const double* src = in + t * stride;
            for (int f = 0; f < s.filters; ++f) {
                const double* wf = w + f * K;
                double acc = b[f];
                for (std::size_t k = 0; k < K; ++k) acc += wf[k] * src[k];
                out[f * out_frames + t] = acc;
            }
        }
    } else {
        for (int f = 0; f < s.filters; ++f) {
            double* o = out + f * out_frames;
            std::fill(o, o + out_frames, b[f]);
            for (std::size_t c = 0; c < in_ch; ++c) {
                const double* wfc = w + (f * in_ch + c) * K;
                for (std::size_t k = 0; k < K; ++k) {
                    const double wv = wfc[k];
                    const double* src = in + c * in_frames + k;
                    if (stride == 1) {
                        for (std::size_t t = 0; t < out_frames; ++t) o[t] += wv * src[t];
                    } else {
                        for (std::size_t t = 0; t < out_frames; ++t) o[t] += wv * src[t * stride];
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < s.filters * out_frames; ++i) out[i] = std::max(out[i], 0.0);
}

void conv_backward(const double* in, std::size_t in_ch, std::size_t in_frames, const double* w, const ConvSpec& s,
                   std::size_t out_frames, const double* g, double* dw, double* db, double* din) {
    const std::size_t K = s.kernel, stride = s.stride;
    for (int f = 0; f < s.filters; ++f) {
        const double* gf = g + f * out_frames;
        double bsum = 0.0;
        for (std::size_t t = 0; t < out_frames; ++t) bsum += gf[t];
        db[f] += bsum;
        for (std::size_t c = 0; c < in_ch; ++c) {
            const double* src = in + c * in_frames;
            const std::size_t wbase = (f * in_ch + c) * K;
            for (std::size_t k = 0; k < K; ++k) {
                double acc = 0.0;
                if (stride == 1) {
                    for (std::size_t t = 0; t < out_frames; ++t) acc += gf[t] * src[t + k];
                } else {
                    for (std::size_t t = 0; t < out_frames; ++t) acc += gf[t] * src[t * stride + k];
                }
                dw[wbase + k] += acc;
                if (din) {
                    const double wv = w[wbase + k];
                    double* d = din + c * in_frames + k;
                    if (stride == 1) {
                        for (std::size_t t = 0; t < out_frames; ++t) d[t] += wv * gf[t];
                    } else {
                        for (std::size_t t = 0; t < out_frames; ++t) d[t * stride] += wv * gf[t];
                    }
                }
            }
        }
    }
}

void max_pool(const double* in, std::size_t ch, std::size_t in_frames, std::size_t out_frames, double* out,
              std::uint32_t* arg) {
    for (std::size_t c = 0; c < ch; ++c) {
        const double* src = in + c * in_frames;
        for (std::size_t t = 0; t < out_frames; ++t) {
            const std::size_t start = t * kPoolStride;
            const std::size_t end = std::min(start + kPoolSize, in_frames);
            std::size_t best = start;
            for (std::size_t i = start + 1; i < end; ++i)
                if (src[i] > src[best]) best = i;
            out[c * out_frames + t] = src[best];
            arg[c * out_frames + t] = static_cast<std::uint32_t>(best);
        }
    }
}

/// Routes pooled gradients to the winning frames and applies the ReLU mask
/// of the conv output underneath.
std::vector<double> unpool_relu(const std::vector<double>& gpool, const std::vector<std::uint32_t>& arg,
                                const std::vector<double>& conv, std::size_t ch, std::size_t conv_frames,
                                std::size_t pool_frames) {
    std::vector<double> g(ch * conv_frames, 0.0);
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t t = 0; t < pool_frames; ++t) g[c * conv_frames + arg[c * pool_frames + t]] += gpool[c * pool_frames + t];
    for (std::size_t i = 0; i < g.size(); ++i)
        if (conv[i] <= 0.0) g[i] = 0.0;
    return g;
}

void check_waveform(std::span<const double> x) {
    if (x.size() < kMinInputLength)
        throw data_error("waveform of " + std::to_string(x.size()) + " samples is shorter than the minimum " +
                         std::to_string(kMinInputLength));
    for (double v : x)
        if (!std::isfinite(v)) throw data_error("waveform contains a non-finite sample");
}

std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - m);
    for (double& v : p) v /= sum;
    return p;
}

int argmax(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Accumulates scale * d(loss)/d(params) for one traced clip.
void backward(const CnnModel& model, std::span<const double> x, const Trace& tr, int label, double scale,
              std::vector<double>& grad) {
    const Offsets o = offsets(model.n_classes());
    const double* P = model.parameters().data();
    double* G = grad.data();
    const std::size_t nc = static_cast<std::size_t>(model.n_classes());
    const auto& fr = tr.frames;

    std::vector<double> dlog = softmax(tr.logits);
    dlog[label] -= 1.0;
    for (double& v : dlog) v *= scale;

    std::vector<double> dh(kHiddenUnits, 0.0);
    for (std::size_t j = 0; j < nc; ++j) {
        G[o.bo + j] += dlog[j];
        const double* wrow = P + o.wo + j * kHiddenUnits;
        double* grow = G + o.wo + j * kHiddenUnits;
        for (int i = 0; i < kHiddenUnits; ++i) {
            grow[i] += dlog[j] * tr.hidden[i];
            dh[i] += wrow[i] * dlog[j];
        }
    }
    for (int u = 0; u < kHiddenUnits; ++u)
        if (tr.hidden[u] <= 0.0) dh[u] = 0.0;

    std::vector<double> dpooled(kConv3.filters, 0.0);
    for (int u = 0; u < kHiddenUnits; ++u) {
        G[o.bh + u] += dh[u];
        const double* wrow = P + o.wh + u * kConv3.filters;
        double* grow = G + o.wh + u * kConv3.filters;
        for (int i = 0; i < kConv3.filters; ++i) {
            grow[i] += dh[u] * tr.pooled[i];
            dpooled[i] += wrow[i] * dh[u];
        }
    }

    std::vector<double> dpool3(kConv3.filters * fr.pool3);
    for (int c = 0; c < kConv3.filters; ++c)
        for (std::size_t t = 0; t < fr.pool3; ++t) dpool3[c * fr.pool3 + t] = dpooled[c] / static_cast<double>(fr.pool3);
    const auto dconv3 = unpool_relu(dpool3, tr.arg3, tr.conv3, kConv3.filters, fr.conv3, fr.pool3);
    std::vector<double> dpool2(kConv2.filters * fr.pool2, 0.0);
    conv_backward(tr.pool2.data(), kConv2.filters, fr.pool2, P + o.w3, kConv3, fr.conv3, dconv3.data(), G + o.w3,
                  G + o.b3, dpool2.data());

    const auto dconv2 = unpool_relu(dpool2, tr.arg2, tr.conv2, kConv2.filters, fr.conv2, fr.pool2);
    std::vector<double> dpool1(kConv1.filters * fr.pool1, 0.0);
    conv_backward(tr.pool1.data(), kConv1.filters, fr.pool1, P + o.w2, kConv2, fr.conv2, dconv2.data(), G + o.w2,
                  G + o.b2, dpool1.data());

    const auto dconv1 = unpool_relu(dpool1, tr.arg1, tr.conv1, kConv1.filters, fr.conv1, fr.pool1);
    conv_backward(x.data(), 1, x.size(), P + o.w1, kConv1, fr.conv1, dconv1.data(), G + o.w1, G + o.b1, nullptr);
}

double uar_of(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes) {
    return eval::uar(eval::confusion(truth, pred, static_cast<std::size_t>(n_classes)));
}

}  // namespace

BlockFrames block_frames(std::size_t n) {
    BlockFrames b;
    b.conv1 = conv_out(n, kConv1);
    b.pool1 = pool_out(b.conv1);
    b.conv2 = conv_out(b.pool1, kConv2);
    b.pool2 = pool_out(b.conv2);
    b.conv3 = conv_out(b.pool2, kConv3);
    b.pool3 = pool_out(b.conv3);
    return b;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},     {"batch_size", c.batch_size},
            {"seed", c.seed},                   {"beta1", c.beta1},       {"beta2", c.beta2},
            {"epsilon", c.epsilon},             {"patience", c.patience}, {"validation_fraction", c.validation_fraction}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("cnn train config must be an object");
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "epochs") c.epochs = value.get<int>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "beta1") c.beta1 = value.get<double>();
            else if (key == "beta2") c.beta2 = value.get<double>();
            else if (key == "epsilon") c.epsilon = value.get<double>();
            else if (key == "patience") c.patience = value.get<int>();
            else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
            else throw config_error("unknown cnn train config key '" + key + "'");
        } catch (const nlohmann::json::exception&) {
            throw config_error("cnn train config key '" + key + "' has the wrong type");
        }
    }
    if (!(c.learning_rate >= 0) || c.epochs < 1 || c.batch_size < 1 || c.patience < 0 ||
        !(c.validation_fraction >= 0 && c.validation_fraction < 1) || !(c.beta1 >= 0 && c.beta1 < 1) ||
        !(c.beta2 >= 0 && c.beta2 < 1) || !(c.epsilon > 0))
        throw config_error("cnn train config value out of range");
    return c;
}

std::vector<ParamBlock> CnnModel::layout(int n_classes) {
    const Offsets o = offsets(n_classes);
    return {{"conv1.weight", o.w1, o.b1 - o.w1}, {"conv1.bias", o.b1, o.w2 - o.b1},
            {"conv2.weight", o.w2, o.b2 - o.w2}, {"conv2.bias", o.b2, o.w3 - o.b2},
            {"conv3.weight", o.w3, o.b3 - o.w3}, {"conv3.bias", o.b3, o.wh - o.b3},
            {"hidden.weight", o.wh, o.bh - o.wh}, {"hidden.bias", o.bh, o.wo - o.bh},
            {"output.weight", o.wo, o.bo - o.wo}, {"output.bias", o.bo, o.total - o.bo}};
}

CnnModel CnnModel::initialize(int n_classes, std::uint64_t seed) {
    if (n_classes < 2) throw invalid_argument("a classifier needs at least two classes");
    CnnModel m;
    m.n_classes_ = n_classes;
    m.seed_ = seed;
    m.params_.assign(offsets(n_classes).total, 0.0);
    const std::array<double, 5> fan_in = {double(kConv1.kernel), double(kConv1.filters * kConv2.kernel),
                                          double(kConv2.filters * kConv3.kernel), double(kConv3.filters),
                                          double(kHiddenUnits)};
    Rng rng(seed);
    const auto blocks = layout(n_classes);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const double bound = 1.0 / std::sqrt(fan_in[b / 2]);
        for (std::size_t i = 0; i < blocks[b].size; ++i) m.params_[blocks[b].offset + i] = rng.uniform(-bound, bound);
    }
    return m;
}

std::span<const double> CnnModel::block(const std::string& name) const {
    for (const auto& b : layout(n_classes_))
        if (b.name == name) return {params_.data() + b.offset, b.size};
    throw invalid_argument("unknown parameter block " + name);
}

std::span<double> CnnModel::block(const std::string& name) {
    for (const auto& b : layout(n_classes_))
        if (b.name == name) return {params_.data() + b.offset, b.size};
    throw invalid_argument("unknown parameter block " + name);
}

std::vector<std::vector<double>> CnnModel::first_layer_filters() const {
    const auto w = block("conv1.weight");
    std::vector<std::vector<double>> out;
    for (int f = 0; f < kConv1.filters; ++f) out.emplace_back(w.begin() + f * kConv1.kernel, w.begin() + (f + 1) * kConv1.kernel);
    return out;
}

void forward_resume(const CnnModel& model, std::span<const double> x, Trace& tr, Stage from) {
    const Offsets o = offsets(model.n_classes());
    const double* P = model.parameters().data();
    auto& fr = tr.frames;
    if (from == Stage::Input) {
        check_waveform(x);
        fr = block_frames(x.size());
        tr.conv1.resize(kConv1.filters * fr.conv1);
        conv_relu(x.data(), 1, x.size(), P + o.w1, P + o.b1, kConv1, fr.conv1, tr.conv1.data());
        tr.pool1.resize(kConv1.filters * fr.pool1);
        tr.arg1.resize(tr.pool1.size());
        max_pool(tr.conv1.data(), kConv1.filters, fr.conv1, fr.pool1, tr.pool1.data(), tr.arg1.data());
    }
    if (from <= Stage::Block2) {
        tr.conv2.resize(kConv2.filters * fr.conv2);
        conv_relu(tr.pool1.data(), kConv1.filters, fr.pool1, P + o.w2, P + o.b2, kConv2, fr.conv2, tr.conv2.data());
        tr.pool2.resize(kConv2.filters * fr.pool2);
        tr.arg2.resize(tr.pool2.size());
        max_pool(tr.conv2.data(), kConv2.filters, fr.conv2, fr.pool2, tr.pool2.data(), tr.arg2.data());
    }
    if (from <= Stage::Block3) {
        tr.conv3.resize(kConv3.filters * fr.conv3);
        conv_relu(tr.pool2.data(), kConv2.filters, fr.pool2, P + o.w3, P + o.b3, kConv3, fr.conv3, tr.conv3.data());
        tr.pool3.resize(kConv3.filters * fr.pool3);
        tr.arg3.resize(tr.pool3.size());
        max_pool(tr.conv3.data(), kConv3.filters, fr.conv3, fr.pool3, tr.pool3.data(), tr.arg3.data());
        tr.pooled.assign(kConv3.filters, 0.0);
        for (int c = 0; c < kConv3.filters; ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < fr.pool3; ++t) s += tr.pool3[c * fr.pool3 + t];
            tr.pooled[c] = s / static_cast<double>(fr.pool3);
        }
    }
    tr.hidden.assign(kHiddenUnits, 0.0);
    for (int u = 0; u < kHiddenUnits; ++u) {
        double s = P[o.bh + u];
        const double* w = P + o.wh + u * kConv3.filters;
        for (int i = 0; i < kConv3.filters; ++i) s += w[i] * tr.pooled[i];
        tr.hidden[u] = std::max(s, 0.0);
    }
    const std::size_t nc = static_cast<std::size_t>(model.n_classes());
    tr.logits.assign(nc, 0.0);
    for (std::size_t j = 0; j < nc; ++j) {
        double s = P[o.bo + j];
        const double* w = P + o.wo + j * kHiddenUnits;
        for (int i = 0; i < kHiddenUnits; ++i) s += w[i] * tr.hidden[i];
        tr.logits[j] = s;
    }
}

Trace forward_trace(const CnnModel& model, std::span<const double> x) {
    if (model.parameters().empty()) throw invalid_argument("model is not initialised");
    Trace tr;
    forward_resume(model, x, tr, Stage::Input);
    return tr;
}

ForwardResult forward(const CnnModel& model, std::span<const double> x) {
    Trace tr = forward_trace(model, x);
    return {std::move(tr.logits), std::move(tr.hidden)};
}

double cross_entropy(std::span<const double> logits, int label) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double v : logits) s += std::exp(v - m);
    return m + std::log(s) - logits[label];
}

double loss_and_gradient(const CnnModel& model, const std::vector<std::vector<double>>& clips,
                         const std::vector<int>& labels, std::vector<double>& gradient) {
    if (clips.empty() || clips.size() != labels.size()) throw invalid_argument("clips and labels must match and be non-empty");
    gradient.assign(model.parameters().size(), 0.0);
    const double scale = 1.0 / static_cast<double>(clips.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const Trace tr = forward_trace(model, clips[i]);
        loss += cross_entropy(tr.logits, labels[i]);
        backward(model, clips[i], tr, labels[i], scale, gradient);
    }
    return loss * scale;
}

double mean_loss(const CnnModel& model, const std::vector<std::vector<double>>& clips, const std::vector<int>& labels) {
    double loss = 0.0;
    for (std::size_t i = 0; i < clips.size(); ++i) loss += cross_entropy(forward(model, clips[i]).logits, labels[i]);
    return loss / static_cast<double>(clips.size());
}

std::vector<int> predict(const CnnModel& model, const std::vector<std::vector<double>>& clips) {
    std::vector<int> out;
    out.reserve(clips.size());
    for (const auto& c : clips) out.push_back(argmax(forward(model, c).logits));
    return out;
}

TrainResult train(const std::vector<std::vector<double>>& clips, const std::vector<int>& labels, int n_classes,
                  const TrainConfig& config) {
    if (clips.size() != labels.size() || clips.empty()) throw invalid_argument("clips and labels must match and be non-empty");
    if (n_classes < 2) throw invalid_argument("a classifier needs at least two classes");
    std::vector<std::size_t> counts(n_classes, 0);
    for (int l : labels) {
        if (l < 0 || l >= n_classes) throw invalid_argument("label out of range");
        ++counts[l];
    }
    for (int c = 0; c < n_classes; ++c)
        if (counts[c] == 0) throw data_error("class " + std::to_string(c) + " has no training clips");
    for (const auto& c : clips) check_waveform(c);

    // Validation slice: one fold of a stratified split, when every class can spare a clip.
    std::vector<std::size_t> fit_idx, val_idx;
    const int val_folds = config.validation_fraction > 0 ? static_cast<int>(std::lround(1.0 / config.validation_fraction)) : 0;
    const bool use_val = config.patience > 0 && val_folds >= 2 && clips.size() >= static_cast<std::size_t>(val_folds) &&
                         *std::min_element(counts.begin(), counts.end()) >= 2;
    if (use_val) {
        const auto plan = eval::stratified_kfold(labels, val_folds, derive_seed(config.seed, "validation"));
        fit_idx = plan.train_indices(0);
        val_idx = plan.test_indices(0);
    } else {
        fit_idx.resize(clips.size());
        std::iota(fit_idx.begin(), fit_idx.end(), 0);
    }

    TrainResult result;
    result.model = CnnModel::initialize(n_classes, config.seed);
    result.model.set_train_config(config);
    CnnModel& model = result.model;
    std::vector<double>& p = model.parameters();
    std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0), grad(p.size());
    std::vector<double> best = p;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::int64_t step = 0;
    Rng rng(derive_seed(config.seed, "batches"));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order = fit_idx;
        rng.shuffle(order);
        EpochStats stats;
        stats.epoch = epoch;
        std::vector<int> truth, pred;
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                const Trace tr = forward_trace(model, clips[i]);
                const double loss = cross_entropy(tr.logits, labels[i]);
                if (!std::isfinite(loss))
                    throw numerical_error("cnn training diverged in epoch " + std::to_string(epoch + 1) + " (non-finite loss)");
                loss_sum += loss;
                truth.push_back(labels[i]);
                pred.push_back(argmax(tr.logits));
                backward(model, clips[i], tr, labels[i], scale, grad);
            }
            ++step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < p.size(); ++k) {
                m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
                v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
                p[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.epsilon);
            }
        }
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.train_uar = uar_of(truth, pred, n_classes);
        stats.validation_loss = std::numeric_limits<double>::quiet_NaN();
        stats.validation_uar = std::numeric_limits<double>::quiet_NaN();
        for (double w : p)
            if (!std::isfinite(w))
                throw numerical_error("cnn training diverged in epoch " + std::to_string(epoch + 1) + " (non-finite weights)");

        if (use_val) {
            std::vector<int> vt, vp;
            double vl = 0.0;
            for (std::size_t i : val_idx) {
                const auto out = forward(model, clips[i]);
                vl += cross_entropy(out.logits, labels[i]);
                vt.push_back(labels[i]);
                vp.push_back(argmax(out.logits));
            }
            stats.validation_loss = vl / static_cast<double>(val_idx.size());
            stats.validation_uar = uar_of(vt, vp, n_classes);
            result.history.push_back(stats);
            if (stats.validation_loss < best_val) {
                best_val = stats.validation_loss;
                best = p;
                result.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        } else {
            result.history.push_back(stats);
            result.best_epoch = epoch;
        }
    }
    if (use_val) p = best;
    return result;
}

features::FeatureTable extract_features(const CnnModel& model, const std::vector<std::string>& call_ids,
                                        const std::vector<std::vector<double>>& clips, unsigned threads) {
    if (call_ids.size() != clips.size()) throw invalid_argument("call ids and clips differ in count");
    std::vector<std::string> names;
    for (int i = 0; i < kHiddenUnits; ++i) names.push_back("cnn_" + std::to_string(i));
    std::vector<std::vector<double>> rows(clips.size());
    detail::parallel_for(clips.size(), threads, [&](std::size_t i) { rows[i] = forward(model, clips[i]).hidden; });
    features::FeatureTable table("cnn-crafted", names);
    for (std::size_t i = 0; i < clips.size(); ++i) table.add_row(call_ids[i], std::move(rows[i]));
    return table;
}

std::size_t select_feature_extractor(std::span<const double> fold_uars) {
    if (fold_uars.empty()) throw invalid_argument("no fold models to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < fold_uars.size(); ++i)
        if (fold_uars[i] > fold_uars[best]) best = i;
    return best;
}

FilterResponse filter_frequency_response(const CnnModel& model, double sample_rate_hz) {
    const std::size_t bins = kResponseDft / 2 + 1;
    std::vector<double> sum(bins, 0.0);
    std::vector<dsp::Complex> buf(kResponseDft);
    for (const auto& filter : model.first_layer_filters()) {
        std::fill(buf.begin(), buf.end(), dsp::Complex{});
        for (std::size_t k = 0; k < filter.size(); ++k) buf[k] = filter[k];
        dsp::fft(buf);
        for (std::size_t k = 0; k < bins; ++k) sum[k] += std::abs(buf[k]);
    }
    FilterResponse r;
    for (std::size_t k = 0; k < bins; ++k) {
        r.freqs_hz.push_back(static_cast<double>(k) * sample_rate_hz / static_cast<double>(kResponseDft));
        r.log_cumulative_magnitude.push_back(std::log(std::max(sum[k], kResponseFloor)));
    }
    return r;
}

std::string filter_response_csv(const FilterResponse& r) {
    std::ostringstream out;
    out << "freq_hz,log_cum_magnitude\n";
    for (std::size_t k = 0; k < r.freqs_hz.size(); ++k)
        out << text::format_double(r.freqs_hz[k]) << ',' << text::format_double(r.log_cumulative_magnitude[k]) << '\n';
    return out.str();
}

nlohmann::json to_json(const CnnModel& model) {
    nlohmann::json j;
    j["format"] = "meerkit-cnn";
    j["format_version"] = 1;
    auto conv = [](const ConvSpec& s) {
        return nlohmann::json{{"kernel", s.kernel}, {"stride", s.stride}, {"padding", 0}, {"filters", s.filters}};
    };
    j["architecture"] = {{"conv1", conv(kConv1)},
                         {"conv2", conv(kConv2)},
                         {"conv3", conv(kConv3)},
                         {"pool", {{"size", kPoolSize}, {"stride", kPoolStride}}},
                         {"adaptive_pool_target", 1},
                         {"hidden_units", kHiddenUnits}};
    j["n_classes"] = model.n_classes();
    j["seed"] = model.seed();
    j["train_config"] = to_json(model.train_config());
    nlohmann::json params = nlohmann::json::object();
    for (const auto& b : CnnModel::layout(model.n_classes())) {
        const auto s = model.block(b.name);
        params[b.name] = std::vector<double>(s.begin(), s.end());
    }
    j["parameters"] = std::move(params);
    return j;
}

CnnModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "meerkit-cnn") throw data_error("not a CNN model document");
        if (j.at("format_version").get<int>() != 1) throw data_error("unsupported CNN model version");
        // Architecture constants must match this build exactly.
        nlohmann::json probe = to_json(CnnModel::initialize(2, 0));
        if (j.at("architecture") != probe.at("architecture"))
            throw data_error("CNN model architecture does not match this toolkit");
        const int n_classes = j.at("n_classes").get<int>();
        CnnModel m = CnnModel::initialize(n_classes, j.at("seed").get<std::uint64_t>());
        m.set_train_config(train_config_from_json(j.at("train_config")));
        const auto& params = j.at("parameters");
        if (params.size() != CnnModel::layout(n_classes).size()) throw data_error("CNN model has unexpected parameter blocks");
        for (const auto& b : CnnModel::layout(n_classes)) {
            const auto values = params.at(b.name).get<std::vector<double>>();
            if (values.size() != b.size) throw data_error("parameter block " + b.name + " has the wrong size");
            for (double v : values)
                if (!std::isfinite(v)) throw data_error("parameter block " + b.name + " holds a non-finite value");
            std::copy(values.begin(), values.end(), m.parameters().begin() + static_cast<std::ptrdiff_t>(b.offset));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed CNN model: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw data_error(e.what());
        throw;
    }
}

}  // namespace meerkit::cnn
