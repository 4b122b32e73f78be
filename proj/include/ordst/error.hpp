#pragma once

#include <stdexcept>
#include <string>

namespace ordst {

/// Exception carrying a short machine-parsable code (e.g. "E_DUPLICATE_CELL")
/// alongside the human-readable message. The CLI prints both on one line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace ordst
