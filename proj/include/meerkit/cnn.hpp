#pragma once

#include "meerkit/features.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace meerkit::cnn {

struct ConvSpec {
    int kernel;
    int stride;
    int filters;
};

// Fixed architecture: three conv/ReLU/max-pool blocks, adaptive average
// pooling to one frame, an 80-unit ReLU layer and a linear class head.
inline constexpr ConvSpec kConv1{40, 30, 40};
inline constexpr ConvSpec kConv2{7, 1, 40};
inline constexpr ConvSpec kConv3{3, 1, 80};
inline constexpr int kPoolSize = 2;
inline constexpr int kPoolStride = 2;
inline constexpr int kHiddenUnits = 80;
inline constexpr std::size_t kMinInputLength = 730;

struct BlockFrames {
    std::size_t conv1 = 0, pool1 = 0, conv2 = 0, pool2 = 0, conv3 = 0, pool3 = 0;
};

/// Frame counts through the three blocks. A pool whose input is shorter than
/// its window passes the single frame through.
BlockFrames block_frames(std::size_t input_length);

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Epochs without validation-loss improvement before stopping; 0 disables
    /// early stopping and the validation slice.
    int patience = 10;
    double validation_fraction = 0.1;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Named contiguous range inside the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset;
    std::size_t size;
};

class CnnModel {
public:
    CnnModel() = default;
    /// Uniform fan-in initialisation: every weight and bias of a layer is drawn
    /// from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static CnnModel initialize(int n_classes, std::uint64_t seed);

    int n_classes() const { return n_classes_; }
    std::uint64_t seed() const { return seed_; }
    const TrainConfig& train_config() const { return config_; }
    void set_train_config(const TrainConfig& c) { config_ = c; }

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    /// conv1.weight, conv1.bias, ..., hidden.weight, hidden.bias, output.weight, output.bias.
    static std::vector<ParamBlock> layout(int n_classes);
    std::span<const double> block(const std::string& name) const;
    std::span<double> block(const std::string& name);

    /// First-layer filters, kConv1.filters rows of kConv1.kernel taps.
    std::vector<std::vector<double>> first_layer_filters() const;

private:
    int n_classes_ = 0;
    std::uint64_t seed_ = 0;
    TrainConfig config_;
    std::vector<double> params_;
};

/// Intermediate activations of one clip, kept for backpropagation and for
/// re-running the network from a given stage.
struct Trace {
    BlockFrames frames;
    std::vector<double> conv1, pool1, conv2, pool2, conv3, pool3;     // post-ReLU / pooled, channel-major
    std::vector<std::uint32_t> arg1, arg2, arg3;                      // max-pool winners
    std::vector<double> pooled;                                       // kConv3.filters
    std::vector<double> hidden;                                       // post-ReLU
    std::vector<double> logits;
};

enum class Stage { Input, Block2, Block3, Head };

/// Full forward pass. Rejects inputs shorter than kMinInputLength or containing
/// non-finite samples.
Trace forward_trace(const CnnModel& model, std::span<const double> waveform);
/// Recomputes the trace from `from` onwards, reusing earlier activations.
void forward_resume(const CnnModel& model, std::span<const double> waveform, Trace& trace, Stage from);

struct ForwardResult {
    std::vector<double> logits;
    std::vector<double> hidden;
};
ForwardResult forward(const CnnModel& model, std::span<const double> waveform);

/// Softmax cross-entropy of one logit vector.
double cross_entropy(std::span<const double> logits, int label);

/// Mean cross-entropy over the clips and its gradient with respect to every parameter.
double loss_and_gradient(const CnnModel& model, const std::vector<std::vector<double>>& clips,
                         const std::vector<int>& labels, std::vector<double>& gradient);
double mean_loss(const CnnModel& model, const std::vector<std::vector<double>>& clips, const std::vector<int>& labels);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_uar = 0.0;
    double validation_loss = 0.0;  // NaN without a validation slice
    double validation_uar = 0.0;
};

struct TrainResult {
    CnnModel model;
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

/// Mini-batch Adam on mean cross-entropy. Batches are processed clip by clip,
/// so a batch gradient equals the mean of the per-clip gradients exactly.
TrainResult train(const std::vector<std::vector<double>>& clips, const std::vector<int>& labels, int n_classes,
                  const TrainConfig& config);

std::vector<int> predict(const CnnModel& model, const std::vector<std::vector<double>>& clips);

/// Rows are forward(...).hidden; the feature set id is "cnn-crafted".
features::FeatureTable extract_features(const CnnModel& model, const std::vector<std::string>& call_ids,
                                        const std::vector<std::vector<double>>& clips,
                                        unsigned threads = 1);

/// Index of the best fold UAR; ties go to the lowest index.
std::size_t select_feature_extractor(std::span<const double> fold_uars);

struct FilterResponse {
    std::vector<double> freqs_hz;                  // 513 bins
    std::vector<double> log_cumulative_magnitude;  // ln(max(sum |H_f(k)|, 1e-12))
};
inline constexpr std::size_t kResponseDft = 1024;
inline constexpr double kResponseFloor = 1e-12;
FilterResponse filter_frequency_response(const CnnModel& model, double sample_rate_hz = 16000.0);
std::string filter_response_csv(const FilterResponse& r);

nlohmann::json to_json(const CnnModel& model);
CnnModel model_from_json(const nlohmann::json& j);

}  // namespace meerkit::cnn
