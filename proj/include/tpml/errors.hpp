#pragma once

#include <stdexcept>
#include <string>

namespace tpml {

/// Error categories map onto the CLI exit codes:
/// config -> 2, data -> 3, shape -> 4, numerical -> 5.
enum class ErrorKind {
    config,
    data,
    shape,
    numerical,
    capability,
    cost_guard,
    contract,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorKind::shape, m) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& m) : Error(ErrorKind::numerical, m) {}
};
/// Requested operation is not available for the given inputs,
/// e.g. nodal machinery on non-nested hierarchies.
struct CapabilityError : Error {
    explicit CapabilityError(const std::string& m) : Error(ErrorKind::capability, m) {}
};
struct CostGuardError : Error {
    explicit CostGuardError(const std::string& m) : Error(ErrorKind::cost_guard, m) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& m) : Error(ErrorKind::contract, m) {}
};

inline int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::shape: return 4;
        default: return 5;
    }
}

}  // namespace tpml
