#pragma once

#include <stdexcept>
#include <string>

namespace teach {

/// Raised when caller-supplied data violates a documented precondition
/// (bad topic filter, unknown profile name, invalid config value, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for faults detected while the system is running.
class RuntimeFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace teach
