#pragma once

#include <stdexcept>
#include <string>

namespace c2bn {

// Base for every error the library raises. The CLI maps the subclasses onto
// exit codes (usage 1, data 2, training 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class LabelError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class FingerprintMismatch : public DataError {
public:
    using DataError::DataError;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace c2bn
