#pragma once

#include <stdexcept>
#include <string>

namespace hcft {

// Exit-code mapping for the CLI: config=2, data=3, training=4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised on malformed binary containers; carries the offending byte offset.
struct FormatError : DataError {
    FormatError(const std::string& msg, std::size_t offset)
        : DataError(msg + " (byte offset " + std::to_string(offset) + ")"), byte_offset(offset) {}
    std::size_t byte_offset;
};

struct TrainingError : std::runtime_error {
    TrainingError(const std::string& msg, int epoch_index)
        : std::runtime_error(msg + " (epoch " + std::to_string(epoch_index) + ")"), epoch(epoch_index) {}
    int epoch;
};

}  // namespace hcft
