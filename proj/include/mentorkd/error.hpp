#pragma once

#include <stdexcept>
#include <string>

namespace mentorkd {

// Bad configuration value (out-of-range hyperparameter, unknown key, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent data (JSONL parse failures, dangling ids, overlap).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Misuse of the model / autodiff machinery.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure talking to a remote endpoint.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mentorkd
