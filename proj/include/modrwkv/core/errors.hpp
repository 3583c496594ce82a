#pragma once

#include <stdexcept>
#include <string>

namespace modrwkv {

// Shape/rank mismatches between tensor operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numeric domain violations (log of non-positive, m > n, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation invoked in an invalid object state (frozen tape, ...).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// Malformed binary/file input; message carries the byte offset when known.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or unknown run-configuration content.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Precondition violated by a caller (checked contracts).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Training aborted (NaN loss etc.); carries a reference to the last
// checkpoint known to be good, or an empty string if none was written.
struct TrainAbort : std::runtime_error {
    explicit TrainAbort(const std::string& msg, std::string last_good = "")
        : std::runtime_error(msg), last_good_checkpoint(std::move(last_good)) {}
    std::string last_good_checkpoint;
};

}  // namespace modrwkv
