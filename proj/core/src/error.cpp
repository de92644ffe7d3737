#include "flesd/error.hpp"

namespace flesd {

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

ConfigError::ConfigError(std::string path, const std::string& what)
    : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

}  // namespace flesd
