#pragma once

#include <stdexcept>
#include <string>

namespace rpnet {

// Bad files, missing paths, malformed manifests. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses or gradients, failed numeric checks. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace rpnet
