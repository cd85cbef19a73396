#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qmlkit {

/// Precondition violated by a caller-supplied value.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent serialized document.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& location, const std::string& what)
        : std::runtime_error(location.empty() ? what : location + ": " + what),
          location_(location) {}

    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

/// The integrator produced a state that violates trace conservation or is not finite.
class IntegrationFailure : public std::runtime_error {
public:
    IntegrationFailure(std::size_t step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace qmlkit
