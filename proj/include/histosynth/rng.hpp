#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace histosynth {

/// Seedable random stream used for every stochastic step of the pipeline
/// (initialization, batching, augmentation, latent sampling). The whole state,
/// including the cached normal deviate, round-trips through state()/set_state().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream derived from (seed, index), e.g. one per worker or image.
  static Rng derive(std::uint64_t seed, std::uint64_t index);

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1)
  std::int64_t uniform_int(std::int64_t n);  // {0, ..., n-1}
  bool coin();

  std::string state() const;
  void set_state(const std::string& s);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace histosynth
