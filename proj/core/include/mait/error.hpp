#pragma once

#include <stdexcept>
#include <string>

namespace mait {

// Error taxonomy used across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, DataError -> 3, anything else -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Schema mismatches, parse failures, invariant violations in input data.
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid arguments to an operation (k < 1, empty column list, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Failures while fitting or applying models and transforms.
class TrainingError : public Error {
public:
    using Error::Error;
};

class PredictionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mait
