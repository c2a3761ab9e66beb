#pragma once

#include "eulbo/rng.hpp"
#include "eulbo/sobol_table.hpp"
#include "eulbo/types.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

namespace eulbo {

/// Gray-code Sobol sequence in up to detail::kSobolDims dimensions, 32-bit resolution,
/// with an optional random digital shift.
class SobolSequence {
 public:
  static constexpr int kBits = 32;

  explicit SobolSequence(Index dim) : dim_(dim), state_(static_cast<std::size_t>(dim), 0u), shift_(state_) {
    if (dim < 1 || dim > detail::kSobolDims) throw InvalidArgument("sobol: dimension out of the supported range");
    directions_.resize(static_cast<std::size_t>(dim));
    for (Index d = 0; d < dim; ++d) {
      auto& v = directions_[static_cast<std::size_t>(d)];
      if (d == 0) {
        v.fill(1u);
      } else {
        const std::uint32_t poly = detail::kSobolPoly[d];
        const int deg = std::bit_width(poly) - 1;
        for (int j = 0; j < deg; ++j) v[j] = detail::kSobolInit[d][j];
        for (int j = deg; j < kBits; ++j) {
          std::uint32_t nv = v[j - deg];
          std::uint32_t pow2 = 1;
          for (int k = 0; k < deg; ++k) {
            pow2 <<= 1;
            if ((poly >> (deg - 1 - k)) & 1u) nv ^= pow2 * v[j - k - 1];
          }
          v[j] = nv;
        }
      }
      for (int j = 0; j < kBits; ++j) v[j] <<= (kBits - 1 - j);
    }
  }

  /// Same sequence XOR-shifted by per-dimension random words.
  static SobolSequence scrambled(Index dim, CounterRng& rng) {
    SobolSequence s(dim);
    for (auto& w : s.shift_) w = static_cast<std::uint32_t>(rng.next_u64() >> 32);
    return s;
  }

  Index dim() const { return dim_; }

  /// Next point in [0, 1)^dim.
  template <typename Scalar = double>
  Vector<Scalar> next() {
    Vector<Scalar> x(dim_);
    for (Index d = 0; d < dim_; ++d) {
      x(d) = Scalar(state_[static_cast<std::size_t>(d)] ^ shift_[static_cast<std::size_t>(d)]) * Scalar(0x1p-32);
    }
    const int c = std::countr_one(index_);
    if (c >= kBits) throw InvalidArgument("sobol: sequence exhausted");
    for (Index d = 0; d < dim_; ++d) state_[static_cast<std::size_t>(d)] ^= directions_[static_cast<std::size_t>(d)][c];
    ++index_;
    return x;
  }

  template <typename Scalar = double>
  Matrix<Scalar> draw(Index n) {
    Matrix<Scalar> out(n, dim_);
    for (Index i = 0; i < n; ++i) out.row(i) = next<Scalar>().transpose();
    return out;
  }

 private:
  Index dim_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
  std::vector<std::array<std::uint32_t, kBits>> directions_;
};

}  // namespace eulbo
