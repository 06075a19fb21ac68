#pragma once

#include <stdexcept>
#include <string>

namespace decaf {

// Thrown on dimension mismatches in tensor/graph arithmetic.
struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration values.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem-level failures (missing file, unwritable path).
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Syntactically or semantically malformed on-disk data.
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unknown identifier (e.g. a DAG node name).
struct lookup_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A metric whose value does not exist for the given inputs
// (single-class AUROC, empty group rate, zero-variance correlation).
struct undefined_metric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss or parameter detected during optimization.
struct training_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace decaf
