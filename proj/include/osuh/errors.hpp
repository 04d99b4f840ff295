#pragma once

#include <stdexcept>
#include <string>

namespace osuh {

// Bad run configuration or malformed input files. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite likelihood terms, degenerate conditioning, failed estimation.
// CLI exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EstimationError : NumericError {
    using NumericError::NumericError;
};

// Identification-lab diagnostics: ill-conditioned inversions, ambiguous
// eigenvalue gaps, singular scale pinning. CLI exit code 4.
struct IdentificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace osuh
