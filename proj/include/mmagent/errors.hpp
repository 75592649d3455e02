// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mmagent {

// Base class for all framework errors. `code()` is a stable identifier
// that tests and the CLI exit-code mapping key off.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Backend/transport failures form their own branch: tool dispatch lets these
// propagate (retriable per backend policy) while everything else is surfaced
// to the reasoner as tool output text.
class BackendFailure : public Error {
public:
    using Error::Error;
};

}  // namespace mmagent

#define MMAGENT_ERROR_TYPE(Name)                          \
    struct Name : ::mmagent::Error {                      \
        explicit Name(const std::string& what)            \
            : ::mmagent::Error(#Name, what) {}            \
    }

#define MMAGENT_BACKEND_ERROR_TYPE(Name)                  \
    struct Name : ::mmagent::BackendFailure {             \
        explicit Name(const std::string& what)            \
            : ::mmagent::BackendFailure(#Name, what) {}   \
    }
