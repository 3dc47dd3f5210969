#pragma once

#include <stdexcept>
#include <string>

namespace lgsm {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
    using Error::Error;
};
struct InvalidEdge : Error {
    using Error::Error;
};
struct InvalidParams : Error {
    using Error::Error;
};
struct DisconnectedGraph : Error {
    using Error::Error;
};
struct ZeroInfluenceRow : Error {
    using Error::Error;
};
struct DegenerateLabels : Error {
    using Error::Error;
};
struct EmptyBatch : Error {
    using Error::Error;
};
struct NonFiniteActivation : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

// CLI exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitInstability = 3,
    kExitIo = 4,
};

}  // namespace lgsm
