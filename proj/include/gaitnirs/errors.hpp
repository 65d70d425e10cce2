#pragma once
#include <stdexcept>
#include <string>

namespace gaitnirs {

// Exit-code mapping for the CLI: ConfigError -> 2, DataError -> 3, TrainError -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// DataError annotated with the pipeline stage that raised it.
struct StageError : DataError {
    std::string stage;
    std::string message; // without the stage prefix
    StageError(std::string stage_, const std::string& msg)
        : DataError(stage_ + ": " + msg), stage(std::move(stage_)), message(msg) {}
};

} // namespace gaitnirs
