#pragma once

#include <stdexcept>
#include <string>

namespace seganet {

// Malformed or inconsistent input data: bad files, shape mismatches,
// invalid configurations. CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime: non-finite values, diverging training,
// undefined metrics. CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace seganet
