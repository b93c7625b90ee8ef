#pragma once

#include <stdexcept>
#include <string>

namespace rmlab {

/// Bad user input: malformed spec strings, out-of-range sizes, bad config keys.
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A mathematical precondition of a bound or construction does not hold.
/// The message names the violated inequality.
struct regime_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// An internal invariant that follows from a theorem failed to hold.
struct consistency_error : std::logic_error {
    using std::logic_error::logic_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rmlab
