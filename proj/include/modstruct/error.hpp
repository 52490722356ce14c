#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modstruct {

enum class ErrorCode : int {
  InvalidInput = 1,
  InvalidAim,
  Overlap,
  RootSplit,
  SingularInertia,
  RankDeficient,
  Stalled,
  InvalidParams,
  TooLarge,
  Diverged,
  Parse,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidAim: return "InvalidAim";
    case ErrorCode::Overlap: return "Overlap";
    case ErrorCode::RootSplit: return "RootSplit";
    case ErrorCode::SingularInertia: return "SingularInertia";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::Stalled: return "Stalled";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define MODSTRUCT_REQUIRE(cond, code, msg)            \
  do {                                                \
    if (!(cond)) throw ::modstruct::Error((code), (msg)); \
  } while (0)

}  // namespace modstruct
