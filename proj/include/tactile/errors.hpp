#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tactile {

// Bad caller input: negative geometry, wrong shapes, dt <= 0, ...
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double residual, long frame = -1)
        : std::runtime_error(what), residual_(residual), frame_(frame) {}

    double residual() const noexcept { return residual_; }
    // Frame index within a press, -1 when the failure came from a single solve.
    long frame() const noexcept { return frame_; }

private:
    double residual_;
    long frame_;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class CorruptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingFailure : public std::runtime_error {
public:
    TrainingFailure(const std::string& what, int epoch)
        : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tactile
