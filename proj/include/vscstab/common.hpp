#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vscstab {

/// Failure category; the CLI maps these onto exit codes 1 and 2.
enum class ErrorKind { Validation, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error validation_error(const std::string& what) { return {ErrorKind::Validation, what}; }
inline Error numerical_error(const std::string& what) { return {ErrorKind::Numerical, what}; }

/// Outcome of integrating one initial condition of a phase portrait.
enum class BasinClass { ConvergedToTarget, ConvergedElsewhere, Diverged, Undecided };

inline std::string_view to_string(BasinClass c) {
    switch (c) {
        case BasinClass::ConvergedToTarget: return "CONVERGED_TO_TARGET";
        case BasinClass::ConvergedElsewhere: return "CONVERGED_ELSEWHERE";
        case BasinClass::Diverged: return "DIVERGED";
        case BasinClass::Undecided: return "UNDECIDED";
    }
    return "UNKNOWN";
}

}  // namespace vscstab
