#pragma once

#include <cstdint>

namespace cbf {

// Counter-based random stream (Philox2x64-10). A stream is fully identified
// by (seed, stream id): draws are a pure function of that identity and the
// draw index, so parallel tasks keyed by distinct ids are independent and a
// run is reproducible regardless of worker count or scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

  // Independent child stream; distinct ids give distinct streams.
  RngStream split(std::uint64_t id) const;

  std::uint64_t next_u64();
  double uniform();            // [0, 1), 53-bit resolution
  double normal();             // standard normal (Marsaglia polar)
  double gamma(double shape);  // Gamma(shape, 1), shape > 0
  double chisq(double df);     // chi-square, df > 0

  std::uint64_t seed_id() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t ctr_[2] = {0, 0};
  std::uint64_t block_[2] = {0, 0};
  int avail_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cbf
