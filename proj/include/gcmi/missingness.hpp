#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gcmi/data.hpp"

namespace gcmi {

// Coefficients of the 15-column outcome model used by the reference
// synthetic experiment.
inline constexpr std::array<double, 15> kReferenceAlpha = {
    0.542, -0.769, 0.298, -0.156, 0.778, -0.391, -0.629, 0.311,
    0.913, -0.025, -0.676, 0.512,  0.840, -0.265, -0.678,
};

struct SyntheticSpec {
    int n = 2000;
    int p = 15;
    double rho = 0.3;
    double sigma2 = 1.0;
    // Empty: kReferenceAlpha when p == 15, otherwise Unif[-1,1]^p from the seed.
    std::vector<double> alpha;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const SyntheticSpec&) const = default;
};

struct SyntheticData {
    Matrix x;       // n x p
    nn::Vector y;   // n
    std::vector<double> alpha;
};

// Rows ~ N(0, sigma2 [(1 - rho) I + rho 11']) via Cholesky; y = x alpha + eps.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

// Cellwise: one draw per cell. Blockwise: consecutive columns are grouped in
// blocks of `block_size` and each (row, block) shares one draw.
enum class MaskLayout { cellwise, blockwise };

struct McarSpec {
    double p = 0.3;
    bool operator==(const McarSpec&) const = default;
};

struct MarSpec {
    std::vector<int> cond_cols{0, 1, 2, 3};
    std::vector<int> target_cols; // empty: every column not conditioned on
    // One coefficient vector per target column (length |cond_cols|); empty
    // draws each from Unif[-1,1].
    std::vector<std::vector<double>> betas;
    double intercept = 0.0;
    bool operator==(const MarSpec&) const = default;
};

struct MnarSpec {
    double b0 = -1.5;
    double b1 = 3.0;
    std::vector<int> columns; // empty: all columns
    bool operator==(const MnarSpec&) const = default;
};

using Mechanism = std::variant<McarSpec, MarSpec, MnarSpec>;

struct AmputationSpec {
    Mechanism mechanism = McarSpec{};
    MaskLayout layout = MaskLayout::cellwise;
    int block_size = 1;
    // Columns never amputed (for instance an outcome column).
    std::vector<int> protected_cols;
    std::uint64_t seed = 0;

    static AmputationSpec of(Mechanism m) {
        AmputationSpec spec;
        spec.mechanism = std::move(m);
        return spec;
    }
    bool operator==(const AmputationSpec&) const = default;
};

std::string mechanism_name(const Mechanism& m);
// MCAR rate, MNAR intercept, MAR intercept: the grid coordinate a benchmark row is keyed by.
double mechanism_level(const Mechanism& m);

Mask ampute_mcar(const Matrix& x, double p, std::uint64_t seed, MaskLayout layout = MaskLayout::cellwise,
                 int block_size = 1);
Mask ampute_mar(const Matrix& x, const MarSpec& spec, std::uint64_t seed, MaskLayout layout = MaskLayout::cellwise,
                int block_size = 1);
// Self-masking: P(missing) = clamp(b0 + b1 * x_ij, 0, 1).
Mask ampute_mnar(const Matrix& x, const MnarSpec& spec, std::uint64_t seed);

Mask ampute(const Matrix& x, const AmputationSpec& spec);

} // namespace gcmi
