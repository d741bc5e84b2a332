#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gcmi/nn.hpp"

namespace gcmi {

using nn::Matrix;

enum class ColumnKind { continuous, binary, categorical };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view name);

// Binary and categorical cells hold the index of their level in `levels`.
struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    std::vector<std::string> levels;

    bool is_discrete() const { return kind != ColumnKind::continuous; }
    int level_count() const { return static_cast<int>(levels.size()); }
};

using Schema = std::vector<ColumnSpec>;

// y = (x - shift) / scale
struct Affine {
    double shift = 0.0;
    double scale = 1.0;

    double apply(double x) const { return (x - shift) / scale; }
    double invert(double y) const { return y * scale + shift; }
    bool operator==(const Affine&) const = default;
};

Schema continuous_schema(int columns, std::string_view prefix = "X");

// n x P missingness indicator, true = missing.
class Mask {
public:
    Mask() = default;
    Mask(Eigen::Index rows, Eigen::Index cols, bool value = false);

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }

    bool operator()(Eigen::Index r, Eigen::Index c) const { return bits_[index(r, c)] != 0; }
    void set(Eigen::Index r, Eigen::Index c, bool missing) { bits_[index(r, c)] = missing ? 1 : 0; }

    std::int64_t count() const;
    std::int64_t column_count(Eigen::Index c) const;
    double column_fraction(Eigen::Index c) const;
    double fraction() const;

    std::vector<Eigen::Index> missing_rows(Eigen::Index c) const;
    std::vector<Eigen::Index> observed_rows(Eigen::Index c) const;

    bool operator==(const Mask&) const = default;

private:
    std::size_t index(Eigen::Index r, Eigen::Index c) const {
        return static_cast<std::size_t>(r * cols_ + c);
    }

    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Column-typed table with a missingness mask. Missing cells hold NaN.
class DataMatrix {
public:
    DataMatrix() = default;
    // Cells flagged by the mask are overwritten with NaN; observed cells must
    // be finite and, for discrete columns, valid level indices.
    DataMatrix(Schema schema, Matrix values, Mask mask);

    static DataMatrix complete(Schema schema, Matrix values);

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    const Schema& schema() const { return schema_; }
    const ColumnSpec& column(Eigen::Index c) const { return schema_[static_cast<std::size_t>(c)]; }
    const Matrix& values() const { return values_; }
    const Mask& mask() const { return mask_; }

    bool is_missing(Eigen::Index r, Eigen::Index c) const { return mask_(r, c); }
    double value(Eigen::Index r, Eigen::Index c) const { return values_(r, c); }
    bool has_missing() const { return mask_.count() > 0; }

    // Same schema and values with every cell observed; `filled` must agree
    // with this matrix on observed cells.
    DataMatrix with_filled(const Matrix& filled) const;

private:
    Schema schema_;
    Matrix values_;
    Mask mask_;
};

} // namespace gcmi
