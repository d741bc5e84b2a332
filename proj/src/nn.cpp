#include "gcmi/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <random>
#include <string>

#include "gcmi/error.hpp"
#include "gcmi/random.hpp"

namespace gcmi::nn {

namespace {

// Kept strictly inside (0, 1): saturated outputs would otherwise hit the
// bounds exactly and break log-losses and the open (0, 2) range of the critic.
double sigmoid(double x) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return std::clamp(s, lo, hi);
}

void apply_output(OutputActivation act, const Matrix& pre, Matrix& post) {
    switch (act) {
    case OutputActivation::identity:
        post = pre;
        break;
    case OutputActivation::sigmoid:
        post = pre.unaryExpr([](double v) { return sigmoid(v); });
        break;
    case OutputActivation::scaled_sigmoid:
        post = pre.unaryExpr([](double v) { return 2.0 * sigmoid(v); });
        break;
    }
}

// d post / d pre expressed through post, which is what the cache holds.
Matrix output_derivative(OutputActivation act, const Matrix& post) {
    switch (act) {
    case OutputActivation::identity:
        return Matrix::Ones(post.rows(), post.cols());
    case OutputActivation::sigmoid:
        return post.array() * (1.0 - post.array());
    case OutputActivation::scaled_sigmoid:
        // y = 2s, dy/dx = 2 s (1 - s) = y (1 - y / 2)
        return post.array() * (1.0 - 0.5 * post.array());
    }
    return {};
}

void check_input(const Mlp& mlp, const Matrix& inputs) {
    if (inputs.cols() != mlp.input_dim()) {
        fail(ErrorKind::shape, "mlp input width " + std::to_string(inputs.cols()) +
                                   " does not match input_dim " + std::to_string(mlp.input_dim()));
    }
}

void check_cache(const Mlp& mlp, const ForwardCache& cache, const Matrix& output_grads) {
    require(cache.post.size() == mlp.layers().size() && cache.input.cols() == mlp.input_dim(), ErrorKind::shape,
            "forward cache does not belong to this network");
    const Matrix& out = cache.post.back();
    require(output_grads.rows() == out.rows() && output_grads.cols() == out.cols(), ErrorKind::shape,
            "output gradient shape does not match the forward batch");
}

} // namespace

std::string_view to_string(OutputActivation act) {
    switch (act) {
    case OutputActivation::identity: return "identity";
    case OutputActivation::sigmoid: return "sigmoid";
    case OutputActivation::scaled_sigmoid: return "scaled_sigmoid_0_2";
    }
    return "unknown";
}

OutputActivation output_activation_from_string(std::string_view name) {
    if (name == "identity") return OutputActivation::identity;
    if (name == "sigmoid") return OutputActivation::sigmoid;
    if (name == "scaled_sigmoid_0_2") return OutputActivation::scaled_sigmoid;
    fail(ErrorKind::invalid_argument, "unknown output activation '" + std::string(name) + "'");
}

void ParamGrads::set_zero() {
    for (auto& l : layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
    require(other.layers.size() == layers.size(), ErrorKind::shape, "gradient layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].weight += other.layers[i].weight;
        layers[i].bias += other.layers[i].bias;
    }
    return *this;
}

Mlp::Mlp(std::vector<DenseLayer> layers, OutputActivation output_activation)
    : layers_(std::move(layers)), output_activation_(output_activation) {
    require(!layers_.empty(), ErrorKind::invalid_argument, "mlp needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        require(l.weight.rows() > 0 && l.weight.cols() > 0, ErrorKind::invalid_argument,
                "layer " + std::to_string(i) + " has an empty weight matrix");
        require(l.bias.size() == l.weight.rows(), ErrorKind::shape,
                "layer " + std::to_string(i) + " bias size does not match its output width");
        if (i > 0) {
            require(l.weight.cols() == layers_[i - 1].weight.rows(), ErrorKind::shape,
                    "layer " + std::to_string(i) + " input width does not chain with layer " +
                        std::to_string(i - 1));
        }
    }
    require(all_finite(), ErrorKind::numeric, "mlp parameters must be finite");
}

Mlp Mlp::create(int input_dim, std::span<const int> hidden_dims, int output_dim,
                OutputActivation output_activation, std::uint64_t seed) {
    require(input_dim > 0 && output_dim > 0, ErrorKind::invalid_argument,
            "mlp input and output dimensions must be positive");
    require(!hidden_dims.empty(), ErrorKind::invalid_argument, "mlp needs at least one hidden layer");
    for (int h : hidden_dims) {
        require(h > 0, ErrorKind::invalid_argument, "hidden layer widths must be positive");
    }

    Rng rng(seed);
    std::vector<DenseLayer> layers;
    int fan_in = input_dim;
    auto add_layer = [&](int out) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        DenseLayer l{Matrix(out, fan_in), Vector::Zero(out)};
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = dist(rng);
        }
        layers.push_back(std::move(l));
        fan_in = out;
    };
    for (int h : hidden_dims) add_layer(h);
    add_layer(output_dim);
    return Mlp(std::move(layers), output_activation);
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

bool Mlp::all_finite() const {
    for (const auto& l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

Matrix Mlp::forward(const Matrix& inputs) const {
    check_input(*this, inputs);
    Matrix h = inputs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Matrix pre = h * layers_[i].weight.transpose();
        pre.rowwise() += layers_[i].bias.transpose();
        if (i + 1 < layers_.size()) {
            h = pre.cwiseMax(0.0);
        } else {
            apply_output(output_activation_, pre, h);
        }
    }
    return h;
}

const Matrix& Mlp::forward(const Matrix& inputs, ForwardCache& cache) const {
    check_input(*this, inputs);
    cache.input = inputs;
    cache.pre.resize(layers_.size());
    cache.post.resize(layers_.size());
    const Matrix* h = &cache.input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Matrix& pre = cache.pre[i];
        pre.noalias() = *h * layers_[i].weight.transpose();
        pre.rowwise() += layers_[i].bias.transpose();
        if (i + 1 < layers_.size()) {
            cache.post[i] = pre.cwiseMax(0.0);
        } else {
            apply_output(output_activation_, pre, cache.post[i]);
        }
        h = &cache.post[i];
    }
    return cache.post.back();
}

ParamGrads Mlp::backward(const ForwardCache& cache, const Matrix& output_grads,
                         Matrix* input_grads) const {
    ParamGrads grads;
    backward_into(cache, output_grads, grads, input_grads);
    return grads;
}

void Mlp::backward_into(const ForwardCache& cache, const Matrix& output_grads, ParamGrads& grads,
                        Matrix* input_grads) const {
    check_cache(*this, cache, output_grads);
    grads.layers.resize(layers_.size());
    Matrix& delta = cache.delta;
    Matrix& back = cache.back;
    delta = output_grads.cwiseProduct(output_derivative(output_activation_, cache.post.back()));
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const Matrix& layer_in = k == 0 ? cache.input : cache.post[k - 1];
        grads.layers[k].weight.noalias() = delta.transpose() * layer_in;
        grads.layers[k].bias.noalias() = delta.colwise().sum().transpose();
        if (k > 0) {
            back.noalias() = delta * layers_[k].weight;
            delta = (cache.pre[k - 1].array() > 0.0).select(back, 0.0);
        } else if (input_grads != nullptr) {
            input_grads->noalias() = delta * layers_[k].weight;
        }
    }
}

Matrix Mlp::input_gradient(const ForwardCache& cache, const Matrix& output_grads) const {
    check_cache(*this, cache, output_grads);
    Matrix& delta = cache.delta;
    Matrix& back = cache.back;
    delta = output_grads.cwiseProduct(output_derivative(output_activation_, cache.post.back()));
    for (std::size_t k = layers_.size(); k-- > 1;) {
        back.noalias() = delta * layers_[k].weight;
        delta = (cache.pre[k - 1].array() > 0.0).select(back, 0.0);
    }
    return delta * layers_.front().weight;
}

ParamGrads Mlp::backward(const Matrix& inputs, const Matrix& output_grads) const {
    ForwardCache cache;
    forward(inputs, cache);
    return backward(cache, output_grads);
}

ParamGrads Mlp::zero_grads() const {
    ParamGrads g;
    g.layers.reserve(layers_.size());
    for (const auto& l : layers_) {
        g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    }
    return g;
}

AdamState::AdamState(const Mlp& mlp, AdamConfig config)
    : config_(config), first_(mlp.zero_grads()), second_(mlp.zero_grads()) {
    require(config_.learning_rate > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
    require(config_.beta1 > 0.0 && config_.beta1 < 1.0, ErrorKind::invalid_argument, "beta1 must lie in (0,1)");
    require(config_.beta2 > 0.0 && config_.beta2 < 1.0, ErrorKind::invalid_argument, "beta2 must lie in (0,1)");
    require(config_.epsilon > 0.0, ErrorKind::invalid_argument, "epsilon must be positive");
    require(config_.l2 >= 0.0, ErrorKind::invalid_argument, "l2 coefficient must be non-negative");
}

void adam_step(Mlp& mlp, const ParamGrads& grads, AdamState& state) {
    auto& layers = mlp.layers();
    require(grads.layers.size() == layers.size() && state.first_.layers.size() == layers.size(),
            ErrorKind::shape, "gradient layout does not match the network");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& g = grads.layers[i];
        require(g.weight.rows() == layers[i].weight.rows() && g.weight.cols() == layers[i].weight.cols() &&
                    g.bias.size() == layers[i].bias.size(),
                ErrorKind::shape, "gradient shape mismatch at layer " + std::to_string(i));
        if (!g.weight.allFinite() || !g.bias.allFinite()) {
            fail(ErrorKind::numeric, "non-finite gradient at layer " + std::to_string(i));
        }
    }

    const auto& cfg = state.config_;
    ++state.step_count_;
    const double t = static_cast<double>(state.step_count_);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        const auto g = (grad + cfg.l2 * param).eval();
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        update(layers[i].weight, grads.layers[i].weight, state.first_.layers[i].weight,
               state.second_.layers[i].weight);
        update(layers[i].bias, grads.layers[i].bias, state.first_.layers[i].bias,
               state.second_.layers[i].bias);
    }
}

nlohmann::json to_json(const Mlp& mlp) {
    nlohmann::json doc;
    doc["format"] = "gcmi-mlp";
    doc["version"] = 1;
    doc["output_activation"] = std::string(to_string(mlp.output_activation()));
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const auto& l : mlp.layers()) {
        nlohmann::json jl;
        jl["in"] = l.weight.cols();
        jl["out"] = l.weight.rows();
        jl["weight"] = std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size());
        jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back(std::move(jl));
    }
    return doc;
}

Mlp mlp_from_json(const nlohmann::json& doc) {
    try {
        require(doc.at("format") == "gcmi-mlp", ErrorKind::parse, "not a gcmi-mlp checkpoint");
        require(doc.at("version") == 1, ErrorKind::parse, "unsupported checkpoint version");
        std::vector<DenseLayer> layers;
        for (const auto& jl : doc.at("layers")) {
            const auto in = jl.at("in").get<Eigen::Index>();
            const auto out = jl.at("out").get<Eigen::Index>();
            const auto w = jl.at("weight").get<std::vector<double>>();
            const auto b = jl.at("bias").get<std::vector<double>>();
            require(in > 0 && out > 0 && static_cast<Eigen::Index>(w.size()) == in * out &&
                        static_cast<Eigen::Index>(b.size()) == out,
                    ErrorKind::parse, "checkpoint layer arrays do not match declared dimensions");
            layers.push_back({Eigen::Map<const Matrix>(w.data(), out, in), Eigen::Map<const Vector>(b.data(), out)});
        }
        return Mlp(std::move(layers), output_activation_from_string(doc.at("output_activation").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Mlp& mlp, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write checkpoint " + path.string());
    out << to_json(mlp).dump() << '\n';
}

Mlp load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot read checkpoint " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, "checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    return mlp_from_json(doc);
}

} // namespace gcmi::nn
