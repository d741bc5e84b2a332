#include "gcmi/gcin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "gcmi/error.hpp"
#include "gcmi/random.hpp"

namespace gcmi {

namespace {

constexpr double kProbClamp = 1e-12;

void require_non_empty(std::span<const double> xs, const char* what) {
    require(!xs.empty(), ErrorKind::invalid_argument, std::string(what) + " must not be empty");
}

void require_same_support(const DiscreteDist& p, const DiscreteDist& g) {
    require(p.support() == g.support(), ErrorKind::invalid_argument,
            "distributions must share an identical support");
}

// Encodes raw target codes the way the discriminator sees real data.
Matrix encode_target(std::span<const double> codes, ColumnKind kind, int level_count, const Affine& norm) {
    const auto n = static_cast<Eigen::Index>(codes.size());
    if (kind == ColumnKind::categorical) {
        Matrix out = Matrix::Zero(n, level_count);
        for (Eigen::Index i = 0; i < n; ++i) out(i, static_cast<Eigen::Index>(codes[i])) = 1.0;
        return out;
    }
    Matrix out(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, 0) = kind == ColumnKind::continuous ? norm.apply(codes[static_cast<std::size_t>(i)])
                                                   : codes[static_cast<std::size_t>(i)];
    }
    return out;
}

Affine fit_zscore(const Matrix& m, Eigen::Index col) {
    const double mean = m.col(col).mean();
    const double var = (m.col(col).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    return {mean, sd > 1e-12 ? sd : 1.0};
}

Affine fit_zscore(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    return {mean, sd > 1e-12 ? sd : 1.0};
}

Matrix normalize_predictors(const Matrix& x, std::span<const Affine> norm) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const auto& a = norm[static_cast<std::size_t>(c)];
        out.col(c) = (x.col(c).array() - a.shift) / a.scale;
    }
    return out;
}

void hstack_into(const Matrix& a, const Matrix& b, Matrix& out) {
    out.resize(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
    Matrix out;
    hstack_into(a, b, out);
    return out;
}

Matrix draw_noise(Rng& rng, Eigen::Index rows, int k) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(rows, k);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) z(r, c) = normal(rng);
    }
    return z;
}

} // namespace

double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake) {
    require_non_empty(d_real, "d_real");
    require_non_empty(d_fake, "d_fake");
    double real = 0.0;
    for (double d : d_real) real += (d - 2.0) * (d - 2.0);
    double fake = 0.0;
    for (double d : d_fake) fake += d * d;
    return real / (2.0 * static_cast<double>(d_real.size())) + fake / (2.0 * static_cast<double>(d_fake.size()));
}

double generator_loss(std::span<const double> d_fake) {
    require_non_empty(d_fake, "d_fake");
    double s = 0.0;
    for (double d : d_fake) s += (d - 1.0) * (d - 1.0);
    return s / (2.0 * static_cast<double>(d_fake.size()));
}

double accuracy_penalty(double x, double x_hat, ColumnKind kind) {
    if (kind == ColumnKind::continuous) return (x_hat - x) * (x_hat - x);
    require(x == 0.0 || x == 1.0, ErrorKind::domain, "discrete accuracy penalty needs x in {0,1}");
    require(x_hat > 0.0 && x_hat < 1.0, ErrorKind::domain, "discrete accuracy penalty needs x_hat in (0,1)");
    return -x * std::log(x_hat) - (1.0 - x) * std::log(1.0 - x_hat);
}

DiscreteDist::DiscreteDist(std::vector<double> support, std::vector<double> probabilities)
    : support_(std::move(support)), probabilities_(std::move(probabilities)) {
    require(!support_.empty(), ErrorKind::invalid_argument, "distribution support must not be empty");
    require(support_.size() == probabilities_.size(), ErrorKind::invalid_argument,
            "support and probabilities differ in length");
    double total = 0.0;
    for (double q : probabilities_) {
        require(q >= 0.0 && std::isfinite(q), ErrorKind::invalid_argument, "probabilities must be non-negative");
        total += q;
    }
    require(std::abs(total - 1.0) <= 1e-12, ErrorKind::invalid_argument, "probabilities must sum to 1");
    auto sorted = support_;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::invalid_argument,
            "support points must be distinct");
}

double DiscreteDist::mass_at(double point) const {
    for (std::size_t i = 0; i < support_.size(); ++i) {
        if (support_[i] == point) return probabilities_[i];
    }
    return 0.0;
}

double optimal_discriminator(const DiscreteDist& p, const DiscreteDist& g, double point) {
    const double pr = p.mass_at(point);
    const double pg = g.mass_at(point);
    require(pr + pg > 0.0, ErrorKind::undefined_point, "both distributions put zero mass at the point");
    return 2.0 * pr / (pr + pg);
}

double chi2_generator_objective(const DiscreteDist& p, const DiscreteDist& g) {
    require_same_support(p, g);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p.probabilities()[i];
        const double b = g.probabilities()[i];
        if (a + b > 0.0) s += (a - b) * (a - b) / (a + b);
    }
    return 0.5 * s;
}

double population_discriminator_loss(const DiscreteDist& p, const DiscreteDist& g,
                                     std::span<const double> d_values) {
    require_same_support(p, g);
    require(d_values.size() == p.size(), ErrorKind::shape, "one discriminator value per support point");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = d_values[i];
        s += p.probabilities()[i] * (d - 2.0) * (d - 2.0) + g.probabilities()[i] * d * d;
    }
    return 0.5 * s;
}

double population_generator_objective(const DiscreteDist& p, const DiscreteDist& g,
                                      std::span<const double> d_values) {
    require_same_support(p, g);
    require(d_values.size() == p.size(), ErrorKind::shape, "one discriminator value per support point");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = d_values[i];
        s += (p.probabilities()[i] + g.probabilities()[i]) * (d - 1.0) * (d - 1.0);
    }
    return 0.5 * s;
}

std::vector<int> scale_architecture(std::int64_t n_samples, std::int64_t n_features) {
    if (n_samples <= 20000) return {100};
    if (n_samples < 30000) return {200, 100};
    if (n_features >= 50) return {400, 200};
    return {200, 100};
}

void TrainConfig::validate() const {
    auto positive = [](bool ok, const char* what) {
        require(ok, ErrorKind::invalid_argument, std::string("train config: ") + what);
    };
    positive(lr_generator > 0.0 && lr_discriminator > 0.0, "learning rates must be positive");
    positive(l2 >= 0.0, "l2 must be non-negative");
    positive(gen_iters_per_cycle > 0 && disc_iters_per_cycle > 0, "iteration counts must be positive");
    positive(batch_size > 0, "batch_size must be positive");
    positive(max_epochs > 0, "max_epochs must be positive");
    positive(acc_penalty_weight >= 0.0, "acc_penalty_weight must be non-negative");
    positive(early_stop_patience > 0, "early_stop_patience must be positive");
    positive(early_stop_tolerance >= 0.0, "early_stop_tolerance must be non-negative");
    positive(noise_dim >= 1, "noise_dim must be at least 1");
    for (int h : hidden_dims) positive(h > 0, "hidden widths must be positive");
}

double discriminator_batch_loss(const nn::Mlp& generator, const nn::Mlp& discriminator, const Matrix& cond,
                                const Matrix& target_enc, const Matrix& noise, nn::ParamGrads* disc_grads,
                                BatchWorkspace* ws) {
    BatchWorkspace local;
    BatchWorkspace& w = ws != nullptr ? *ws : local;
    const Eigen::Index b = cond.rows();
    hstack_into(cond, noise, w.gen_in);
    const Matrix& fake = generator.forward(w.gen_in, w.gen);

    // real rows first, generated rows second, one pass through D
    Matrix& d_in = w.disc_in;
    d_in.resize(2 * b, cond.cols() + target_enc.cols());
    d_in.topLeftCorner(b, cond.cols()) = cond;
    d_in.topRightCorner(b, target_enc.cols()) = target_enc;
    d_in.bottomLeftCorner(b, cond.cols()) = cond;
    d_in.bottomRightCorner(b, fake.cols()) = fake;

    const Matrix& d = discriminator.forward(d_in, w.disc);
    const auto real = d.topRows(b).array();
    const auto gen = d.bottomRows(b).array();
    const double nb = static_cast<double>(b);
    const double loss = (real - 2.0).square().sum() / (2.0 * nb) + gen.square().sum() / (2.0 * nb);

    if (disc_grads != nullptr) {
        w.out_grad.resize(2 * b, 1);
        w.out_grad.topRows(b) = (real - 2.0).matrix() / nb;
        w.out_grad.bottomRows(b) = gen.matrix() / nb;
        discriminator.backward_into(w.disc, w.out_grad, *disc_grads);
    }
    return loss;
}

GeneratorBatchLoss generator_batch_loss(const nn::Mlp& generator, const nn::Mlp& discriminator,
                                        const Matrix& cond, const Matrix& target_enc, const Matrix& noise,
                                        ColumnKind kind, double penalty_weight, nn::ParamGrads* gen_grads,
                                        BatchWorkspace* ws) {
    BatchWorkspace local;
    BatchWorkspace& w = ws != nullptr ? *ws : local;
    const Eigen::Index b = cond.rows();
    const double nb = static_cast<double>(b);

    hstack_into(cond, noise, w.gen_in);
    const Matrix& fake = generator.forward(w.gen_in, w.gen);
    hstack_into(cond, fake, w.disc_in);
    const Matrix& d = discriminator.forward(w.disc_in, w.disc);

    GeneratorBatchLoss out;
    out.adversarial = (d.array() - 1.0).square().sum() / (2.0 * nb);

    Matrix acc_grad(fake.rows(), fake.cols());
    if (kind == ColumnKind::continuous) {
        const auto diff = (fake - target_enc).array();
        out.accuracy = diff.square().sum() / nb;
        acc_grad = 2.0 * diff.matrix() / nb;
    } else {
        double s = 0.0;
        for (Eigen::Index r = 0; r < fake.rows(); ++r) {
            for (Eigen::Index c = 0; c < fake.cols(); ++c) {
                const double x = target_enc(r, c);
                const double p = std::clamp(fake(r, c), kProbClamp, 1.0 - kProbClamp);
                s += -x * std::log(p) - (1.0 - x) * std::log(1.0 - p);
                acc_grad(r, c) = (p - x) / (p * (1.0 - p)) / nb;
            }
        }
        out.accuracy = s / nb;
    }
    out.total = out.adversarial + penalty_weight * out.accuracy;

    if (gen_grads != nullptr) {
        w.out_grad = (d.array() - 1.0).matrix() / nb;
        w.in_grad = discriminator.input_gradient(w.disc, w.out_grad);
        const Matrix fake_grad = w.in_grad.rightCols(fake.cols()) + penalty_weight * acc_grad;
        generator.backward_into(w.gen, fake_grad, *gen_grads);
    }
    return out;
}

GcinFit train_gcin(const Matrix& x_cond, std::span<const double> x_target, ColumnKind kind,
                   const TrainConfig& cfg, int level_count, int column_index) {
    cfg.validate();
    const auto n = static_cast<Eigen::Index>(x_target.size());
    require(n >= 2, ErrorKind::insufficient_data,
            "column " + std::to_string(column_index) + " needs at least 2 observed rows to train");
    require(x_cond.rows() == n, ErrorKind::shape, "conditioning rows do not match target length");
    require(x_cond.allFinite(), ErrorKind::invalid_argument, "conditioning data contains missing entries");
    for (double v : x_target) {
        require(std::isfinite(v), ErrorKind::invalid_argument, "target contains missing entries");
    }
    if (kind == ColumnKind::binary) level_count = 2;
    if (kind == ColumnKind::categorical) {
        require(level_count >= 2, ErrorKind::invalid_argument, "categorical target needs at least 2 levels");
    }
    if (kind != ColumnKind::continuous) {
        for (double v : x_target) {
            require(v >= 0 && v < level_count && v == std::floor(v), ErrorKind::invalid_argument,
                    "discrete target holds a value outside its levels");
        }
    }

    std::vector<Affine> predictor_norm;
    for (Eigen::Index c = 0; c < x_cond.cols(); ++c) predictor_norm.push_back(fit_zscore(x_cond, c));
    const Affine target_norm = kind == ColumnKind::continuous ? fit_zscore(x_target) : Affine{};

    const Matrix cond = normalize_predictors(x_cond, predictor_norm);
    const Matrix target = encode_target(x_target, kind, level_count, target_norm);
    const auto cond_dim = static_cast<int>(cond.cols());
    const auto target_width = static_cast<int>(target.cols());

    const std::vector<int> hidden =
        cfg.hidden_dims.empty() ? scale_architecture(n, x_cond.cols() + 1) : cfg.hidden_dims;
    const auto head = kind == ColumnKind::continuous ? nn::OutputActivation::identity : nn::OutputActivation::sigmoid;

    GcinFit fit{
        GcinPair{
            nn::Mlp::create(cond_dim + cfg.noise_dim, hidden, target_width, head, derive_seed(cfg.seed, 1)),
            nn::Mlp::create(cond_dim + target_width, hidden, 1, nn::OutputActivation::scaled_sigmoid,
                            derive_seed(cfg.seed, 2)),
            cfg.noise_dim,
            column_index,
            kind,
            kind == ColumnKind::continuous ? 0 : level_count,
            std::move(predictor_norm),
            target_norm,
        },
        {},
    };
    auto& gen = fit.pair.generator;
    auto& disc = fit.pair.discriminator;

    nn::AdamState gen_opt(gen, {cfg.lr_generator, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, cfg.l2});
    nn::AdamState disc_opt(disc, {cfg.lr_discriminator, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, cfg.l2});

    const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
    const double samples_per_cycle = static_cast<double>(cfg.gen_iters_per_cycle) * static_cast<double>(batch);
    const auto max_cycles = static_cast<int>(std::max(
        1.0, std::ceil(static_cast<double>(cfg.max_epochs) * static_cast<double>(n) / samples_per_cycle)));

    Rng rng(derive_seed(cfg.seed, 3));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Matrix cond_b(batch, cond_dim);
    Matrix target_b(batch, target_width);
    auto draw_batch = [&] {
        // partial Fisher-Yates: the first `batch` entries form a uniform sample
        for (Eigen::Index i = 0; i < batch; ++i) {
            std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
            const Eigen::Index row = order[static_cast<std::size_t>(i)];
            cond_b.row(i) = cond.row(row);
            target_b.row(i) = target.row(row);
        }
    };

    double best_total = std::numeric_limits<double>::infinity();
    int stale = 0;
    nn::ParamGrads grads;
    BatchWorkspace ws;
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        CycleRecord rec;
        rec.cycle = cycle;
        for (int it = 0; it < cfg.disc_iters_per_cycle; ++it) {
            draw_batch();
            const Matrix noise = draw_noise(rng, batch, cfg.noise_dim);
            rec.loss_d += discriminator_batch_loss(gen, disc, cond_b, target_b, noise, &grads, &ws);
            adam_step(disc, grads, disc_opt);
        }
        double total = 0.0;
        for (int it = 0; it < cfg.gen_iters_per_cycle; ++it) {
            draw_batch();
            const Matrix noise = draw_noise(rng, batch, cfg.noise_dim);
            const auto loss = generator_batch_loss(gen, disc, cond_b, target_b, noise, kind,
                                                   cfg.acc_penalty_weight, &grads, &ws);
            rec.loss_g += loss.adversarial;
            rec.loss_acc += loss.accuracy;
            total += loss.total;
            adam_step(gen, grads, gen_opt);
        }
        rec.loss_d /= cfg.disc_iters_per_cycle;
        rec.loss_g /= cfg.gen_iters_per_cycle;
        rec.loss_acc /= cfg.gen_iters_per_cycle;
        total /= cfg.gen_iters_per_cycle;
        if (!std::isfinite(rec.loss_d) || !std::isfinite(total)) {
            fail(ErrorKind::numeric, "non-finite loss in cycle " + std::to_string(cycle) + " while training column " +
                                         std::to_string(column_index));
        }
        fit.trace.cycles.push_back(rec);

        if (total < best_total - cfg.early_stop_tolerance) {
            best_total = total;
            stale = 0;
        } else if (++stale >= cfg.early_stop_patience) {
            fit.trace.stop = TrainStop::early_stop;
            break;
        }
    }
    return fit;
}

std::vector<double> impute_column(const GcinPair& pair, const Matrix& x_cond_mis, std::uint64_t seed,
                                  ImputeOptions options) {
    require(x_cond_mis.cols() == pair.conditioning_dim(), ErrorKind::shape,
            "conditioning width " + std::to_string(x_cond_mis.cols()) + " does not match the generator's " +
                std::to_string(pair.conditioning_dim()));
    const Eigen::Index n = x_cond_mis.rows();
    if (n == 0) return {};

    Rng rng(seed);
    const Matrix noise = draw_noise(rng, n, pair.noise_dim);
    const Matrix out = pair.generator.forward(hstack(normalize_predictors(x_cond_mis, pair.predictor_norm), noise));

    std::vector<double> values(static_cast<std::size_t>(n));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index r = 0; r < n; ++r) {
        auto& v = values[static_cast<std::size_t>(r)];
        switch (pair.column_kind) {
        case ColumnKind::continuous:
            v = pair.target_norm.invert(out(r, 0));
            break;
        case ColumnKind::binary: {
            const double p = out(r, 0);
            v = options.deterministic_discrete ? (p >= 0.5 ? 1.0 : 0.0) : (unif(rng) < p ? 1.0 : 0.0);
            break;
        }
        case ColumnKind::categorical: {
            const auto probs = out.row(r);
            Eigen::Index best = 0;
            probs.maxCoeff(&best);
            if (options.deterministic_discrete) {
                v = static_cast<double>(best);
                break;
            }
            const double total = probs.sum();
            double u = unif(rng) * total;
            v = static_cast<double>(probs.size() - 1);
            for (Eigen::Index c = 0; c < probs.size(); ++c) {
                u -= probs(c);
                if (u < 0.0) {
                    v = static_cast<double>(c);
                    break;
                }
            }
            break;
        }
        }
    }
    return values;
}

void write_trace_csv(const TrainTrace& trace, std::ostream& out) {
    out << "cycle,loss_d,loss_g,loss_acc\n";
    out.precision(17);
    for (const auto& r : trace.cycles) {
        out << r.cycle << ',' << r.loss_d << ',' << r.loss_g << ',' << r.loss_acc << '\n';
    }
}

} // namespace gcmi
