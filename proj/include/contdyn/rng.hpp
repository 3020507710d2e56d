#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace contdyn {

// Philox4x64-10 block function (Salmon et al., SC'11).
std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> ctr,
                                        std::array<std::uint64_t, 2> key);

// Counter-based random stream. The key is (seed, stream_id); counter word 0
// enumerates output blocks and words 1..3 hold a substream path, so any
// (seed, stream_id, path) names a fixed, reproducible sequence that does not
// depend on how work is scheduled.
//
// Satisfies UniformRandomBitGenerator, so it plugs into <random>
// distributions.
class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_{seed, stream_id} {}

  std::uint64_t seed() const { return key_[0]; }
  std::uint64_t stream_id() const { return key_[1]; }
  int depth() const { return depth_; }

  // Independent child stream. At most three levels of nesting.
  RngStream substream(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  // Uniform double in (0, 1): never returns 0 so that log(u) is finite.
  double uniform();

private:
  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 3> path_{0, 0, 0};
  int depth_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 4> buf_{};
  int used_ = 4;
};

}  // namespace contdyn
