#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace epismc {

/// A generator or run request that cannot be satisfied (e.g. a clustering
/// target unreachable for the requested degree profile).
class InfeasibleSpecError : public std::runtime_error {
public:
    explicit InfeasibleSpecError(const std::string& what)
        : std::runtime_error(what) {}
};

/// All particle weights collapsed to zero; carries the failing sub-step.
class FilterDegeneracyError : public std::runtime_error {
public:
    FilterDegeneracyError(std::int64_t step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

/// File missing, unreadable, or malformed; message names the source.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad run configuration (unknown key, missing section, invalid value).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace epismc
