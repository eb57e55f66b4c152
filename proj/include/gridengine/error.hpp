#pragma once

#include <stdexcept>
#include <string>

namespace gridengine {

enum class ErrorKind {
    DuplicateId,
    DanglingEndpoint,
    InvalidValue,
    LayerDowngrade,
    UnknownBus,
    UnknownBranch,
    CycleDetected,
    Parse,
    UnsupportedFeature,
    SchemaVersion,
    Schema,
    ImpedanceTooSmall,
    ZeroReactance,
    Singular,
    IsolatedBus,
    MissingSlack,
    SingularJacobian,
    NotConverged,
    Islanded,
    Protocol,
    Transport,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Exception type for every failure raised by the engine. The kind tells
/// callers (and tests) which contract was violated without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace gridengine
