#include "gcmi/data.hpp"

#include <cmath>
#include <limits>

#include "gcmi/error.hpp"

namespace gcmi {

std::string_view to_string(ColumnKind kind) {
    switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
    }
    return "unknown";
}

ColumnKind column_kind_from_string(std::string_view name) {
    if (name == "continuous") return ColumnKind::continuous;
    if (name == "binary") return ColumnKind::binary;
    if (name == "categorical") return ColumnKind::categorical;
    fail(ErrorKind::invalid_argument, "unknown column kind '" + std::string(name) + "'");
}

Schema continuous_schema(int columns, std::string_view prefix) {
    Schema schema;
    schema.reserve(static_cast<std::size_t>(columns));
    for (int j = 0; j < columns; ++j) {
        schema.push_back({std::string(prefix) + std::to_string(j + 1), ColumnKind::continuous, {}});
    }
    return schema;
}

Mask::Mask(Eigen::Index rows, Eigen::Index cols, bool value)
    : rows_(rows), cols_(cols), bits_(static_cast<std::size_t>(rows * cols), value ? 1 : 0) {
    require(rows >= 0 && cols >= 0, ErrorKind::invalid_argument, "mask dimensions must be non-negative");
}

std::int64_t Mask::count() const {
    std::int64_t n = 0;
    for (auto b : bits_) n += b;
    return n;
}

std::int64_t Mask::column_count(Eigen::Index c) const {
    std::int64_t n = 0;
    for (Eigen::Index r = 0; r < rows_; ++r) n += bits_[index(r, c)];
    return n;
}

double Mask::column_fraction(Eigen::Index c) const {
    return rows_ == 0 ? 0.0 : static_cast<double>(column_count(c)) / static_cast<double>(rows_);
}

double Mask::fraction() const {
    return bits_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits_.size());
}

std::vector<Eigen::Index> Mask::missing_rows(Eigen::Index c) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index r = 0; r < rows_; ++r) {
        if (bits_[index(r, c)]) out.push_back(r);
    }
    return out;
}

std::vector<Eigen::Index> Mask::observed_rows(Eigen::Index c) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index r = 0; r < rows_; ++r) {
        if (!bits_[index(r, c)]) out.push_back(r);
    }
    return out;
}

DataMatrix::DataMatrix(Schema schema, Matrix values, Mask mask)
    : schema_(std::move(schema)), values_(std::move(values)), mask_(std::move(mask)) {
    require(static_cast<Eigen::Index>(schema_.size()) == values_.cols(), ErrorKind::shape,
            "schema has " + std::to_string(schema_.size()) + " columns but values have " +
                std::to_string(values_.cols()));
    require(mask_.rows() == values_.rows() && mask_.cols() == values_.cols(), ErrorKind::shape,
            "mask shape does not match values");
    for (const auto& col : schema_) {
        if (col.kind == ColumnKind::binary) {
            require(col.levels.size() == 2, ErrorKind::invalid_argument,
                    "binary column '" + col.name + "' must declare exactly 2 levels");
        } else if (col.kind == ColumnKind::categorical) {
            require(!col.levels.empty(), ErrorKind::invalid_argument,
                    "categorical column '" + col.name + "' declares no levels");
        }
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
        for (Eigen::Index c = 0; c < values_.cols(); ++c) {
            if (mask_(r, c)) {
                values_(r, c) = nan;
                continue;
            }
            const double v = values_(r, c);
            const auto& col = schema_[static_cast<std::size_t>(c)];
            require(std::isfinite(v), ErrorKind::invalid_argument,
                    "observed cell (" + std::to_string(r) + ", " + col.name + ") is not finite");
            if (col.is_discrete()) {
                require(v >= 0 && v < col.level_count() && v == std::floor(v), ErrorKind::invalid_argument,
                        "cell (" + std::to_string(r) + ", " + col.name + ") is not a declared level");
            }
        }
    }
}

DataMatrix DataMatrix::complete(Schema schema, Matrix values) {
    Mask mask(values.rows(), values.cols());
    return DataMatrix(std::move(schema), std::move(values), std::move(mask));
}

DataMatrix DataMatrix::with_filled(const Matrix& filled) const {
    require(filled.rows() == rows() && filled.cols() == cols(), ErrorKind::shape,
            "filled matrix shape does not match");
    return DataMatrix(schema_, filled, Mask(rows(), cols()));
}

} // namespace gcmi
