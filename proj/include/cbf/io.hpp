#pragma once

#include <stdexcept>
#include <string>

#include "cbf/matalg.hpp"

namespace cbf {

// Filesystem/parsing failures; mapped to their own process exit code.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadOptions {
  double ridge = 0.0;   // added to the diagonal of near-singular records
};

struct LoadReport {
  int repaired = 0;     // records that needed the ridge term
  double ridge = 0.0;
};

// Text container for an SPD series: header line `#rcov v1 n=<n> T=<T>`,
// then one vech(Y_t) record per line, space-separated, shortest
// round-trip decimal so write/read is lossless.
void write_rcov(const std::string& path, const MatrixSeries& series);
MatrixSeries read_rcov(const std::string& path, const LoadOptions& opts = {},
                       LoadReport* report = nullptr);

std::string format_double(double v);    // shortest round-trip representation
double parse_double(const std::string& s);

}  // namespace cbf
