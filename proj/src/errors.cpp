#include "gbmd/errors.hpp"

#include <sstream>
#include <typeinfo>

namespace gbmd {

namespace {

std::string format_level_message(double requested, double max_level) {
    std::ostringstream os;
    os << "noise level " << requested << " is unreachable; schedule maximum is " << max_level;
    return os.str();
}

std::string with_offset(const std::string& what, std::size_t offset) {
    std::ostringstream os;
    os << what << " (byte offset " << offset << ")";
    return os.str();
}

} // namespace

LevelUnreachableError::LevelUnreachableError(double requested, double max_level)
    : std::runtime_error(format_level_message(requested, max_level)),
      requested_(requested),
      max_level_(max_level) {}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(with_offset(what, offset)), offset_(offset) {}

CorruptCheckpointError::CorruptCheckpointError(const std::string& what, std::size_t offset)
    : std::runtime_error(with_offset(what, offset)), offset_(offset) {}

std::string error_category(const std::exception& e) {
    if (dynamic_cast<const ShapeError*>(&e)) return "shape-error";
    if (dynamic_cast<const ContractError*>(&e)) return "contract-error";
    if (dynamic_cast<const LevelUnreachableError*>(&e)) return "level-unreachable";
    if (dynamic_cast<const DegenerateKernelError*>(&e)) return "degenerate-kernel";
    if (dynamic_cast<const ConfigError*>(&e)) return "config-error";
    if (dynamic_cast<const ParseError*>(&e)) return "parse-error";
    if (dynamic_cast<const UnsupportedFormatError*>(&e)) return "unsupported-format";
    if (dynamic_cast<const CorruptCheckpointError*>(&e)) return "corrupt-checkpoint";
    if (dynamic_cast<const UnsupportedVersionError*>(&e)) return "unsupported-version";
    if (dynamic_cast<const TrainingDivergedError*>(&e)) return "training-diverged";
    if (dynamic_cast<const std::domain_error*>(&e)) return "domain-error";
    if (dynamic_cast<const std::out_of_range*>(&e)) return "index-error";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid-argument";
    return "internal-error";
}

} // namespace gbmd
