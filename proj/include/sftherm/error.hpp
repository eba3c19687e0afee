/**
 * @file error.hpp
 * @brief Error type shared by every sftherm module.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sftherm {

enum class ErrorCode {
  invalid_argument,
  non_square_matrix,
  dead_symbol,
  missing_potential_entry,
  inadmissible_potential_entry,
  non_positive_roof,
  schema,
  alphabet_mismatch,
  inadmissible_word,
  not_mixing,
  non_convergence,
  insufficient_depth,
  non_additive_marginal,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "E_INVALID_ARGUMENT";
    case ErrorCode::non_square_matrix: return "E_NON_SQUARE_MATRIX";
    case ErrorCode::dead_symbol: return "E_DEAD_SYMBOL";
    case ErrorCode::missing_potential_entry: return "E_MISSING_POTENTIAL_ENTRY";
    case ErrorCode::inadmissible_potential_entry: return "E_INADMISSIBLE_POTENTIAL_ENTRY";
    case ErrorCode::non_positive_roof: return "E_NON_POSITIVE_ROOF";
    case ErrorCode::schema: return "E_SCHEMA";
    case ErrorCode::alphabet_mismatch: return "E_ALPHABET_MISMATCH";
    case ErrorCode::inadmissible_word: return "E_INADMISSIBLE_WORD";
    case ErrorCode::not_mixing: return "E_NOT_MIXING";
    case ErrorCode::non_convergence: return "E_NON_CONVERGENCE";
    case ErrorCode::insufficient_depth: return "E_INSUFFICIENT_DEPTH";
    case ErrorCode::non_additive_marginal: return "E_NON_ADDITIVE_MARGINAL";
  }
  return "E_UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sftherm
