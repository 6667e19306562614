#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace astrolm {

enum class ErrorCode {
    io = 1,
    parse = 2,
    invalid_argument = 3,
    state = 4,
    numeric = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace astrolm
