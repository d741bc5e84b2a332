#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "gcmi/data.hpp"
#include "gcmi/nn.hpp"

namespace gcmi {

// ---------------------------------------------------------------------------
// Least-squares adversarial losses
// ---------------------------------------------------------------------------

// (1/2n_r) sum (d_real - 2)^2 + (1/2n_f) sum d_fake^2
double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake);

// (1/2n) sum (d_fake - 1)^2
double generator_loss(std::span<const double> d_fake);

// Squared error for continuous targets, cross-entropy for binary ones. A
// categorical target is scored head by head, so callers pass one one-hot
// entry and its predicted probability at a time (same formula as binary).
double accuracy_penalty(double x, double x_hat, ColumnKind kind);

// ---------------------------------------------------------------------------
// Population-level oracles on discrete distributions
// ---------------------------------------------------------------------------

class DiscreteDist {
public:
    // Support points must be distinct; probabilities non-negative, summing to 1 +- 1e-12.
    DiscreteDist(std::vector<double> support, std::vector<double> probabilities);

    const std::vector<double>& support() const { return support_; }
    const std::vector<double>& probabilities() const { return probabilities_; }
    std::size_t size() const { return support_.size(); }

    // Probability mass at `point`, zero off the support.
    double mass_at(double point) const;

private:
    std::vector<double> support_;
    std::vector<double> probabilities_;
};

// D*(x) = 2 p(x) / (p(x) + g(x)), the minimiser of the population
// discriminator loss for a fixed generator distribution g.
double optimal_discriminator(const DiscreteDist& p, const DiscreteDist& g, double point);

// (1/2) sum (p - g)^2 / (p + g): the generator loss once the discriminator is
// optimal, i.e. half the Pearson chi^2 divergence between p + g and 2g.
double chi2_generator_objective(const DiscreteDist& p, const DiscreteDist& g);

// (1/2) sum_x [ p(x) (d(x) - 2)^2 + g(x) d(x)^2 ] with d indexed like the shared support.
double population_discriminator_loss(const DiscreteDist& p, const DiscreteDist& g,
                                     std::span<const double> d_values);

// (1/2) sum_x (p(x) + g(x)) (d(x) - 1)^2: the generator loss written with both
// real and generated mass, as used when the discriminator is held at d.
double population_generator_objective(const DiscreteDist& p, const DiscreteDist& g,
                                      std::span<const double> d_values);

// ---------------------------------------------------------------------------
// Conditional generator / discriminator pair
// ---------------------------------------------------------------------------

// Hidden layer widths by dataset size.
std::vector<int> scale_architecture(std::int64_t n_samples, std::int64_t n_features);

struct TrainConfig {
    double lr_generator = 0.001;
    double lr_discriminator = 0.0005;
    double l2 = 0.0001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int gen_iters_per_cycle = 50;
    int disc_iters_per_cycle = 10;
    int batch_size = 256;
    // Passes over the observed rows of the target column, counted in
    // generator samples and checked at cycle boundaries.
    int max_epochs = 10000;
    double acc_penalty_weight = 1.0;
    int early_stop_patience = 50; // cycles
    double early_stop_tolerance = 1e-4;
    int noise_dim = 8;
    std::vector<int> hidden_dims; // empty: scale_architecture
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct GcinPair {
    nn::Mlp generator;     // (P-1) + k  ->  target width
    nn::Mlp discriminator; // (P-1) + target width  ->  (0, 2)
    int noise_dim = 0;
    int column_index = 0;
    ColumnKind column_kind = ColumnKind::continuous;
    int level_count = 0;                 // categorical only
    std::vector<Affine> predictor_norm;  // one per conditioning column
    Affine target_norm;                  // continuous targets only

    int conditioning_dim() const { return static_cast<int>(predictor_norm.size()); }
    int target_width() const { return generator.output_dim(); }
};

struct CycleRecord {
    int cycle = 0;
    double loss_d = 0.0;   // mean discriminator loss over the cycle
    double loss_g = 0.0;   // mean adversarial generator loss
    double loss_acc = 0.0; // mean accuracy penalty (unweighted)

    bool operator==(const CycleRecord&) const = default;
};

enum class TrainStop { max_epochs, early_stop };

struct TrainTrace {
    std::vector<CycleRecord> cycles;
    TrainStop stop = TrainStop::max_epochs;

    bool operator==(const TrainTrace&) const = default;
};

struct GcinFit {
    GcinPair pair;
    TrainTrace trace;
};

// Trains one pair on fully observed rows. Discrete targets carry level codes
// 0..level_count-1 (level_count is 2 for binary columns).
GcinFit train_gcin(const Matrix& x_cond, std::span<const double> x_target, ColumnKind kind,
                   const TrainConfig& cfg, int level_count = 0, int column_index = 0);

struct ImputeOptions {
    // Discrete columns: take the most probable level instead of sampling.
    bool deterministic_discrete = false;
};

// One fresh noise vector per row; returns values on the original scale
// (level codes for discrete columns).
std::vector<double> impute_column(const GcinPair& pair, const Matrix& x_cond_mis, std::uint64_t seed,
                                  ImputeOptions options = {});

void write_trace_csv(const TrainTrace& trace, std::ostream& out);

// ---------------------------------------------------------------------------
// Batch objectives shared by the trainer and the gradient tests. Inputs are
// already normalised; target_enc is the discriminator's view of the real
// target (z-scored value, 0/1, or one-hot).
// ---------------------------------------------------------------------------

struct GeneratorBatchLoss {
    double adversarial = 0.0;
    double accuracy = 0.0; // mean penalty, unweighted
    double total = 0.0;    // adversarial + weight * accuracy
};

// Buffers carried across training steps; optional for one-off calls.
struct BatchWorkspace {
    nn::ForwardCache gen;
    nn::ForwardCache disc;
    Matrix gen_in;
    Matrix disc_in;
    Matrix out_grad;
    Matrix in_grad;
};

double discriminator_batch_loss(const nn::Mlp& generator, const nn::Mlp& discriminator, const Matrix& cond,
                                const Matrix& target_enc, const Matrix& noise, nn::ParamGrads* disc_grads,
                                BatchWorkspace* ws = nullptr);

GeneratorBatchLoss generator_batch_loss(const nn::Mlp& generator, const nn::Mlp& discriminator,
                                        const Matrix& cond, const Matrix& target_enc, const Matrix& noise,
                                        ColumnKind kind, double penalty_weight, nn::ParamGrads* gen_grads,
                                        BatchWorkspace* ws = nullptr);

} // namespace gcmi
