#include "gcmi/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gcmi/error.hpp"
#include "gcmi/random.hpp"

namespace gcmi {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_block(MaskLayout layout, int block_size) {
    if (layout == MaskLayout::blockwise) {
        require(block_size >= 1, ErrorKind::invalid_argument, "block_size must be at least 1");
    }
}

// Splits `cols` into consecutive groups sharing one draw per row.
std::vector<std::vector<int>> group_columns(const std::vector<int>& cols, MaskLayout layout, int block_size) {
    std::vector<std::vector<int>> groups;
    const std::size_t width = layout == MaskLayout::blockwise ? static_cast<std::size_t>(block_size) : 1;
    for (std::size_t i = 0; i < cols.size(); i += width) {
        groups.emplace_back(cols.begin() + static_cast<std::ptrdiff_t>(i),
                            cols.begin() + static_cast<std::ptrdiff_t>(std::min(cols.size(), i + width)));
    }
    return groups;
}

} // namespace

void SyntheticSpec::validate() const {
    require(n >= 1 && p >= 1, ErrorKind::invalid_argument, "synthetic n and p must be positive");
    require(sigma2 > 0.0, ErrorKind::invalid_argument, "sigma2 must be positive");
    require(noise_sd >= 0.0, ErrorKind::invalid_argument, "noise_sd must be non-negative");
    const double lower = p > 1 ? -1.0 / (p - 1) : -1.0;
    require(rho < 1.0 && rho > lower, ErrorKind::invalid_argument,
            "equicorrelation matrix is not positive definite for rho = " + std::to_string(rho));
    require(alpha.empty() || static_cast<int>(alpha.size()) == p, ErrorKind::invalid_argument,
            "alpha must have p entries");
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const int p = spec.p;
    Matrix cov = Matrix::Constant(p, p, spec.sigma2 * spec.rho);
    cov.diagonal().setConstant(spec.sigma2);
    const Eigen::LLT<Matrix> llt(cov);
    require(llt.info() == Eigen::Success, ErrorKind::invalid_argument, "covariance is not positive definite");
    const Matrix lower = llt.matrixL();

    Rng rng(derive_seed(spec.seed, 0x5359u));
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticData out;
    if (!spec.alpha.empty()) {
        out.alpha = spec.alpha;
    } else if (p == static_cast<int>(kReferenceAlpha.size())) {
        out.alpha.assign(kReferenceAlpha.begin(), kReferenceAlpha.end());
    } else {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int j = 0; j < p; ++j) out.alpha.push_back(unif(rng));
    }

    Matrix z(spec.n, p);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng);
    }
    out.x = z * lower.transpose();
    const Eigen::Map<const nn::Vector> alpha(out.alpha.data(), p);
    out.y = out.x * alpha;
    for (Eigen::Index r = 0; r < out.y.size(); ++r) out.y(r) += spec.noise_sd * normal(rng);
    return out;
}

std::string mechanism_name(const Mechanism& m) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, McarSpec>) return "MCAR";
            else if constexpr (std::is_same_v<T, MarSpec>) return "MAR";
            else return "MNAR";
        },
        m);
}

double mechanism_level(const Mechanism& m) {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, McarSpec>) return s.p;
            else if constexpr (std::is_same_v<T, MarSpec>) return s.intercept;
            else return s.b0;
        },
        m);
}

Mask ampute_mcar(const Matrix& x, double p, std::uint64_t seed, MaskLayout layout, int block_size) {
    require(p >= 0.0 && p <= 1.0, ErrorKind::invalid_argument, "MCAR probability must lie in [0,1]");
    check_block(layout, block_size);
    std::vector<int> cols(static_cast<std::size_t>(x.cols()));
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = static_cast<int>(c);
    const auto groups = group_columns(cols, layout, block_size);

    Rng rng(seed);
    std::bernoulli_distribution draw(p);
    Mask mask(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (const auto& g : groups) {
            const bool missing = draw(rng);
            for (int c : g) mask.set(r, c, missing);
        }
    }
    return mask;
}

Mask ampute_mar(const Matrix& x, const MarSpec& spec, std::uint64_t seed, MaskLayout layout, int block_size) {
    check_block(layout, block_size);
    const auto p = static_cast<int>(x.cols());
    require(!spec.cond_cols.empty(), ErrorKind::invalid_argument, "MAR needs conditioning columns");
    for (int c : spec.cond_cols) {
        require(c >= 0 && c < p, ErrorKind::invalid_argument, "MAR conditioning column out of range");
    }
    std::vector<int> targets = spec.target_cols;
    if (targets.empty()) {
        for (int c = 0; c < p; ++c) {
            if (std::find(spec.cond_cols.begin(), spec.cond_cols.end(), c) == spec.cond_cols.end()) targets.push_back(c);
        }
    }
    for (int c : targets) {
        require(c >= 0 && c < p, ErrorKind::invalid_argument, "MAR target column out of range");
        require(std::find(spec.cond_cols.begin(), spec.cond_cols.end(), c) == spec.cond_cols.end(),
                ErrorKind::invalid_argument, "MAR conditioning and target columns overlap");
    }

    Rng rng(seed);
    auto betas = spec.betas;
    if (betas.empty()) {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            std::vector<double> b(spec.cond_cols.size());
            for (auto& v : b) v = unif(rng);
            betas.push_back(std::move(b));
        }
    }
    require(betas.size() == targets.size(), ErrorKind::invalid_argument, "MAR needs one beta vector per target column");
    for (const auto& b : betas) {
        require(b.size() == spec.cond_cols.size(), ErrorKind::invalid_argument,
                "MAR beta length must match the conditioning columns");
    }

    // block index -> position of its first target (whose beta drives the block)
    std::vector<int> positions(targets.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
    const auto groups = group_columns(positions, layout, block_size);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Mask mask(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (const auto& g : groups) {
            const auto& beta = betas[static_cast<std::size_t>(g.front())];
            double logit = spec.intercept;
            for (std::size_t k = 0; k < beta.size(); ++k) logit += beta[k] * x(r, spec.cond_cols[k]);
            const bool missing = unif(rng) < sigmoid(logit);
            for (int pos : g) mask.set(r, targets[static_cast<std::size_t>(pos)], missing);
        }
    }
    return mask;
}

Mask ampute_mnar(const Matrix& x, const MnarSpec& spec, std::uint64_t seed) {
    std::vector<int> cols = spec.columns;
    if (cols.empty()) {
        for (int c = 0; c < x.cols(); ++c) cols.push_back(c);
    }
    for (int c : cols) require(c >= 0 && c < x.cols(), ErrorKind::invalid_argument, "MNAR column out of range");
    std::vector<bool> active(static_cast<std::size_t>(x.cols()), false);
    for (int c : cols) active[static_cast<std::size_t>(c)] = true;

    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Mask mask(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            // one uniform per cell regardless of activity keeps streams aligned across column subsets
            const double u = unif(rng);
            if (!active[static_cast<std::size_t>(c)]) continue;
            const double prob = std::clamp(spec.b0 + spec.b1 * x(r, c), 0.0, 1.0);
            mask.set(r, c, u < prob);
        }
    }
    return mask;
}

Mask ampute(const Matrix& x, const AmputationSpec& spec) {
    for (int c : spec.protected_cols) {
        require(c >= 0 && c < x.cols(), ErrorKind::invalid_argument, "protected column out of range");
    }
    Mask mask = std::visit(
        [&](const auto& m) -> Mask {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, McarSpec>) {
                return ampute_mcar(x, m.p, spec.seed, spec.layout, spec.block_size);
            } else if constexpr (std::is_same_v<T, MarSpec>) {
                return ampute_mar(x, m, spec.seed, spec.layout, spec.block_size);
            } else {
                return ampute_mnar(x, m, spec.seed);
            }
        },
        spec.mechanism);
    for (int c : spec.protected_cols) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) mask.set(r, c, false);
    }
    return mask;
}

} // namespace gcmi
