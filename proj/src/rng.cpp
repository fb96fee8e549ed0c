#include "cbfirl/rng.hpp"

#include <cmath>
#include <numbers>

#include "cbfirl/error.hpp"

namespace cbfirl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig: return "invalid configuration";
    case ErrorKind::kConfigInfeasible: return "configuration infeasible";
    case ErrorKind::kEpisodeFinished: return "episode finished";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kTrainingDiverged: return "training diverged";
    case ErrorKind::kExpertTooWeak: return "expert too weak";
    case ErrorKind::kThresholdInfeasible: return "threshold infeasible";
    case ErrorKind::kBarrierUnlearnable: return "barrier unlearnable";
    case ErrorKind::kUnsupportedDimension: return "unsupported dimension";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

std::size_t Rng::index(std::size_t n) {
  // Multiply-shift keeps the mapping portable; bias is negligible for n << 2^64.
  return static_cast<std::size_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
}

}  // namespace cbfirl
