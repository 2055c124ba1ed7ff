#pragma once

#include <stdexcept>
#include <string>

namespace bcrf {

// Invalid configuration (bad grid dims, unknown variant, bad CLI flags).
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data content (malformed files, labels missing from training data,
// inconsistent corpora). The CLI maps this to exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bcrf
