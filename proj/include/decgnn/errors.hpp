#pragma once

#include <stdexcept>
#include <string>

namespace decgnn {

// Error categories map one-to-one onto the C status codes and CLI exit codes.
enum class ErrorKind { Internal = 1, Config = 2, Data = 3, Training = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

// Ingestion, imputation, partition, graph, sampling and metric failures.
struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct TrainingError : Error {
    TrainingError(const std::string& what, int epoch)
        : Error(ErrorKind::Training, what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

struct InternalError : Error {
    explicit InternalError(const std::string& what) : Error(ErrorKind::Internal, what) {}
};

}  // namespace decgnn
