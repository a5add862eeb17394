#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace moon {

enum class ErrorCode {
  Parse,            // malformed notebook document
  Version,          // unsupported notebook format version
  Range,            // index out of range
  Format,           // malformed engine metadata
  Syntax,           // script syntax error
  Validation,       // script does not fit the notebook
  Blowup,           // any-order group too large
  Size,             // automaton too large
  Forbidden,        // deleting a scenario cell
  NotFound,         // unknown session
  UndefinedMetric,  // fitness of an empty trace
  InvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

/// Half-open byte range [begin, end) into some source text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<Span> span = std::nullopt)
      : std::runtime_error(message), code_(code), span_(span) {}

  ErrorCode code() const noexcept { return code_; }
  const std::optional<Span>& span() const noexcept { return span_; }

 private:
  ErrorCode code_;
  std::optional<Span> span_;
};

}  // namespace moon
