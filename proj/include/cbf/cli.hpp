#pragma once

#include <string>

#include "cbf/estimate.hpp"

namespace cbf {

// Process entry point for the command-line tool. Returns the process exit
// code: 0 success, 2 validation error, 3 I/O error, 4 numerical failure.
int run_cli(int argc, const char* const* argv);

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

// JSON helpers shared with the tests: model specification documents and fit
// reports round-trip through text.
AnySpec spec_from_json_text(const std::string& text);
std::string spec_to_json_text(const AnySpec& spec);
std::string fit_report_to_json_text(const FitResult& fit);
FitResult fit_report_from_json_text(const std::string& text, const MatrixSeries& series);

}  // namespace cbf
