#pragma once

#include <stdexcept>
#include <string>

namespace eqg {

// Configuration is structurally invalid: bad field value, missing seed,
// inconsistent schedule. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data violates an invariant: malformed file, dangling node reference,
// non-normalizable distribution. Maps to exit code 3 in the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss. Maps to exit code 4 in the CLI.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace eqg
