#pragma once

#include <stdexcept>
#include <string>

namespace thermo {

/// Broad failure category. The CLI maps each category onto an exit code.
enum class ErrorKind {
    Usage,    ///< bad flag or argument value
    Data,     ///< malformed or out-of-contract input data
    Runtime,  ///< I/O failure, subprocess failure, non-convergence
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_data(const std::string& what) { throw Error(ErrorKind::Data, what); }
[[noreturn]] inline void fail_usage(const std::string& what) { throw Error(ErrorKind::Usage, what); }
[[noreturn]] inline void fail_runtime(const std::string& what) { throw Error(ErrorKind::Runtime, what); }

}  // namespace thermo
