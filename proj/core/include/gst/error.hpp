#pragma once

#include <stdexcept>
#include <string>

namespace gst {

// Runtime failure inside the library: shape mismatch, non-finite values,
// bad file IO. The CLI maps this to exit code 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user-facing configuration: unknown key, unparsable value,
// unusable path. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace gst
