#include "cbf/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace cbf {

namespace {

constexpr std::uint64_t kPhiloxM = 0xD2B74407B1CE6E93ULL;
constexpr std::uint64_t kPhiloxW = 0x9E3779B97F4A7C15ULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

// SplitMix64 finalizer; used only to derive keys from (seed, stream).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed ^ mix64(stream))) {}

RngStream RngStream::split(std::uint64_t id) const {
  return RngStream(seed_, mix64(stream_ + 0x632BE59BD9B4E019ULL) ^ mix64(id));
}

void RngStream::refill() {
  std::uint64_t c0 = ctr_[0], c1 = ctr_[1], k = key_;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi, lo;
    mulhilo(kPhiloxM, c0, hi, lo);
    c0 = hi ^ k ^ c1;
    c1 = lo;
    k += kPhiloxW;
  }
  block_[0] = c0;
  block_[1] = c1;
  if (++ctr_[0] == 0) ++ctr_[1];
  avail_ = 2;
}

std::uint64_t RngStream::next_u64() {
  if (avail_ == 0) refill();
  return block_[2 - avail_--];
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_ = true;
  return u * f;
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
  // Marsaglia-Tsang squeeze; shape < 1 handled by boosting.
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::chisq(double df) {
  if (!(df > 0.0)) throw std::invalid_argument("chisq: df must be positive");
  return 2.0 * gamma(0.5 * df);
}

}  // namespace cbf
