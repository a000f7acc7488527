#pragma once
// Error taxonomy. DataError: malformed or inconsistent input (CLI exit 2).
// ProviderError: embedding/LLM endpoint failure (CLI exit 3).

#include <stdexcept>
#include <string>

namespace proprag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

} // namespace proprag
