#pragma once

#include <stdexcept>
#include <string>

namespace byzfed {

// Argument errors use std::invalid_argument. The remaining failure classes get
// their own types so callers (and the CLI exit-code mapping) can tell them apart.

/// Operation requested on an object in the wrong state (e.g. predicting from an empty dataset).
class state_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Linear algebra failed beyond the allowed jitter retry.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An aggregation invariant was broken (non-finite or non-positive value reached the PoE step).
class integrity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scenario configuration or malformed input file.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed dataset file (bad number, ragged row, missing column).
class format_error : public config_error {
public:
    using config_error::config_error;
};

/// A deterministic bound was violated during verification.
class verification_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace byzfed
