#pragma once

#include <stdexcept>
#include <string>

namespace keybuf {

// Invalid parameters, malformed configs, violated preconditions. CLI exit 1.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// A request that is well-formed but too large to compute exactly. CLI exit 2.
class BudgetError : public std::runtime_error {
public:
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace keybuf
