#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace gcmi::nn {

// Batches are dense row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class OutputActivation {
    identity,
    sigmoid,
    scaled_sigmoid, // 2 * sigmoid(x), range (0, 2)
};

std::string_view to_string(OutputActivation act);
OutputActivation output_activation_from_string(std::string_view name);

// weight is out x in, bias has `out` entries.
struct DenseLayer {
    Matrix weight;
    Vector bias;
};

// Gradients share the parameter layout of the owning network.
struct ParamGrads {
    std::vector<DenseLayer> layers;

    void set_zero();
    ParamGrads& operator+=(const ParamGrads& other);
};

// Intermediates of one forward pass, consumed by backward().
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;  // pre-activation of every layer
    std::vector<Matrix> post; // post-activation of every layer (post.back() is the output)
    // Backward-pass scratch. Reusing one cache across steps keeps batch-sized
    // buffers allocated once.
    mutable Matrix delta;
    mutable Matrix back;
};

// Dense feed-forward network: ReLU on every hidden layer, configurable head.
class Mlp {
public:
    Mlp(std::vector<DenseLayer> layers, OutputActivation output_activation);

    // He-normal weights (variance 2 / fan_in), zero biases.
    static Mlp create(int input_dim, std::span<const int> hidden_dims, int output_dim,
                      OutputActivation output_activation, std::uint64_t seed);

    int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
    int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
    OutputActivation output_activation() const { return output_activation_; }

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    std::size_t parameter_count() const;
    bool all_finite() const;

    Matrix forward(const Matrix& inputs) const;
    // The returned reference points into the cache.
    const Matrix& forward(const Matrix& inputs, ForwardCache& cache) const;

    // Gradients of sum(output .* output_grads) w.r.t. every parameter. When
    // input_grads is given it receives the gradient w.r.t. the inputs as well,
    // which is what chains a generator through a discriminator.
    ParamGrads backward(const ForwardCache& cache, const Matrix& output_grads,
                        Matrix* input_grads = nullptr) const;
    ParamGrads backward(const Matrix& inputs, const Matrix& output_grads) const;
    // As backward(), writing into existing gradient storage.
    void backward_into(const ForwardCache& cache, const Matrix& output_grads, ParamGrads& grads,
                       Matrix* input_grads = nullptr) const;
    // Gradient w.r.t. the inputs only; skips the parameter gradients.
    Matrix input_gradient(const ForwardCache& cache, const Matrix& output_grads) const;

    ParamGrads zero_grads() const;

private:
    std::vector<DenseLayer> layers_;
    OutputActivation output_activation_;
};

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2 = 0.0001; // added to the gradient as l2 * param
};

class AdamState {
public:
    AdamState(const Mlp& mlp, AdamConfig config);

    const AdamConfig& config() const { return config_; }
    std::int64_t step_count() const { return step_count_; }
    const ParamGrads& first_moment() const { return first_; }
    const ParamGrads& second_moment() const { return second_; }

private:
    friend void adam_step(Mlp& mlp, const ParamGrads& grads, AdamState& state);

    AdamConfig config_;
    ParamGrads first_;
    ParamGrads second_;
    std::int64_t step_count_ = 0;
};

// Bias-corrected Adam update on grad + l2 * param. Throws a numeric error
// naming the layer when a gradient is not finite; parameters are untouched then.
void adam_step(Mlp& mlp, const ParamGrads& grads, AdamState& state);

// Checkpoint layout (format "gcmi-mlp", version 1):
//   { "format": "gcmi-mlp", "version": 1, "output_activation": "identity",
//     "layers": [ { "in": 3, "out": 100, "weight": [row-major out*in],
//                   "bias": [out] }, ... ] }
nlohmann::json to_json(const Mlp& mlp);
Mlp mlp_from_json(const nlohmann::json& doc);
void save_checkpoint(const Mlp& mlp, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

} // namespace gcmi::nn
