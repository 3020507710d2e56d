#include "contdyn/rng.hpp"

#include "contdyn/error.hpp"

namespace contdyn {

namespace {

constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                    std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace

std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> c,
                                        std::array<std::uint64_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

RngStream RngStream::substream(std::uint64_t index) const {
  if (depth_ >= 3) throw InvalidArgument("RngStream: substream depth exceeds 3");
  RngStream child(key_[0], key_[1]);
  child.path_ = path_;
  // Offset by one so that substream(0) differs from the parent itself.
  child.path_[static_cast<std::size_t>(depth_)] = index + 1;
  child.depth_ = depth_ + 1;
  return child;
}

RngStream::result_type RngStream::operator()() {
  if (used_ == 4) {
    buf_ = philox4x64({block_, path_[0], path_[1], path_[2]}, key_);
    ++block_;
    used_ = 0;
  }
  return buf_[static_cast<std::size_t>(used_++)];
}

double RngStream::uniform() {
  // 53 random bits, shifted into the open interval.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace contdyn
