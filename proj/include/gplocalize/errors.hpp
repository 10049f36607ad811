#ifndef GPLOCALIZE_ERRORS_HPP
#define GPLOCALIZE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gplocalize {

/// A symmetric system stayed numerically singular after the jitter schedule.
class IllConditionedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called out of order, e.g. pushing onto a full buffer.
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed input file. `line()` is 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

void log_warning(const std::string& message);

} // namespace gplocalize

#endif // GPLOCALIZE_ERRORS_HPP
