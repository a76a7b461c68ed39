#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gbmd {

// Error taxonomy. The CLI maps each type to a stable single-word category
// via error_category() so scripts can branch on failures.

// Tensor/image shape disagreements; message names the offending operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Violated call contract other than shapes (non-scalar loss, mismatched
// optimizer state, unpaired evaluation directories, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Requested noise level exceeds what the schedule can reach.
class LevelUnreachableError : public std::runtime_error {
public:
    LevelUnreachableError(double requested, double max_level);
    double requested() const { return requested_; }
    double max_level() const { return max_level_; }

private:
    double requested_;
    double max_level_;
};

// Score of a zero-variance kernel requested (k = 0, or var0 + eta = 0).
class DegenerateKernelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad run configuration (empty dataset, nonsensical option combination).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the byte offset where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// PNM features outside the supported subset (e.g. maxval != 255).
class UnsupportedFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Checkpoint file damaged or truncated; carries the failing byte offset.
class CorruptCheckpointError : public std::runtime_error {
public:
    CorruptCheckpointError(const std::string& what, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// Checkpoint written by an incompatible format version.
class UnsupportedVersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss; message names the step and k values.
class TrainingDivergedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Stable category word for an exception (used by the CLI error line).
std::string error_category(const std::exception& e);

} // namespace gbmd
