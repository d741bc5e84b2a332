#include "gcmi/error.hpp"

namespace gcmi {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::shape: return "shape";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::domain: return "domain";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::unimputable_column: return "unimputable-column";
    case ErrorKind::undefined_point: return "undefined-point";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::insufficient_imputations: return "insufficient-imputations";
    case ErrorKind::parse: return "parse";
    case ErrorKind::empty_input: return "empty-input";
    case ErrorKind::ingestion: return "ingestion";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

} // namespace gcmi
