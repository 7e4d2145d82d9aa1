#pragma once

#include <stdexcept>
#include <string>

namespace ttspin {

enum class ErrorCode {
  invalid_argument,
  invalid_structure,
  mode_mismatch,
  dimension_cap,
  schema,
  singular_local_system,
  io,
};

/// Exception carrying a machine-readable code; the C API maps these onto
/// its status enum.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace ttspin
