#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace splitrag {

// Base for every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input file that does not follow its documented format. Carries the
// offending location so the CLI can point the user at it.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-fatal findings collected while loading or building artifacts.
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
    bool empty() const noexcept { return warnings.empty(); }
};

}  // namespace splitrag
