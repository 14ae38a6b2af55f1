#include "histosynth/rng.hpp"

#include <sstream>

#include "histosynth/error.hpp"

namespace histosynth {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::derive(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
  Rng r;
  r.engine_.seed(seq);
  return r;
}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

double Rng::normal() { return normal_(engine_); }

std::int64_t Rng::uniform_int(std::int64_t n) {
  if (n <= 0) throw Error(ErrorCode::kInvalidArgument, "uniform_int requires n >= 1");
  return std::uniform_int_distribution<std::int64_t>(0, n - 1)(engine_);
}

bool Rng::coin() { return uniform_int(2) == 1; }

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_ << ' ' << normal_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  std::mt19937_64 engine;
  std::normal_distribution<double> normal;
  is >> engine >> normal;
  if (is.fail()) throw Error(ErrorCode::kCorruption, "unreadable RNG state");
  engine_ = engine;
  normal_ = normal;
}

}  // namespace histosynth
