#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcmi/chained.hpp"
#include "gcmi/data.hpp"

namespace gcmi {

struct ColumnHint {
    ColumnKind kind = ColumnKind::continuous;
    std::vector<std::string> levels; // optional; observed levels are used when empty
};

using SchemaHints = std::map<std::string, ColumnHint>;

struct CsvOptions {
    std::vector<std::string> missing_tokens{"", "NA", "NaN"};
};

// RFC 4180 records; quoted fields may contain commas, quotes ("") and newlines.
// Each record carries the 1-based line it starts on.
struct CsvRecord {
    std::vector<std::string> fields;
    int line = 0;
};
std::vector<CsvRecord> parse_csv(std::istream& in);

// Header row required. Kinds are inferred unless hinted: all observed cells
// numeric -> continuous; exactly two distinct labels -> binary; otherwise
// categorical.
DataMatrix read_csv(std::istream& in, const SchemaHints& hints = {}, const CsvOptions& options = {});
DataMatrix read_csv(const std::filesystem::path& path, const SchemaHints& hints = {}, const CsvOptions& options = {});

// Missing cells are written as empty fields; numbers use the shortest
// representation that round-trips.
void write_csv(const DataMatrix& dm, std::ostream& out);
void write_csv(const DataMatrix& dm, const std::filesystem::path& path);
void write_mask_csv(const Mask& mask, const Schema& schema, std::ostream& out);
void write_mask_csv(const Mask& mask, const Schema& schema, const std::filesystem::path& path);

std::string format_number(double v);

struct Normalization {
    DataMatrix matrix;
    std::vector<Affine> params; // identity for discrete and degenerate columns
    std::vector<std::string> warnings;
};

// Min-max scaling of continuous columns to [0,1] using observed cells only.
Normalization normalize(const DataMatrix& dm);
DataMatrix denormalize(const DataMatrix& dm, const std::vector<Affine>& params);

// Writes <prefix>_<m>.csv for every completed dataset and returns the run
// manifest (also written to manifest_name inside dir).
nlohmann::json write_imputation_result(const ImputationResult& result, const std::filesystem::path& dir,
                                       const std::string& prefix, const std::string& manifest_name,
                                       const std::string& input_name);

} // namespace gcmi
