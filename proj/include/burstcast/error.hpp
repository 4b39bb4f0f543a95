#pragma once

#include <stdexcept>
#include <string>

namespace burstcast {

/// Raised for malformed input data or violated preconditions on data
/// (as opposed to programming errors). The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace burstcast
