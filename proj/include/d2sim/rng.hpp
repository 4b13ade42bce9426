#ifndef D2SIM_RNG_HPP_
#define D2SIM_RNG_HPP_

#include <cstdint>
#include <limits>

namespace d2sim {

/// One SplitMix64 step from state z: advance by the golden gamma, then mix.
std::uint64_t mix64(std::uint64_t z) noexcept;

/**
 * Counter-based 64-bit generator.
 *
 * Output k of a stream is a pure function of (key, k), where the key is
 * derived from up to three 64-bit coordinates. Streams keyed by
 * (root seed, worker, iteration) therefore produce the same draws no matter
 * which order workers or algorithms consume them in.
 *
 * Satisfies std::uniform_random_bit_generator.
 */
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0,
                      std::uint64_t substream = 0) noexcept;

  /// Stream used for worker `worker`'s minibatch at round `iteration`.
  static CounterRng for_round(std::uint64_t root_seed, std::uint64_t worker,
                              std::uint64_t iteration) noexcept {
    return CounterRng(root_seed, worker, iteration);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Unbiased integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace d2sim

#endif  // D2SIM_RNG_HPP_
