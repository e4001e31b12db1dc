#include "ipidlab/bitmatrix.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace ipidlab {

BitMatrix BitMatrix::identity(std::size_t n) {
  BitMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
  return m;
}

void BitMatrix::swap_rows(std::size_t a, std::size_t b) {
  if (a == b) return;
  std::swap_ranges(row(a), row(a) + stride_, row(b));
}

bool BitMatrix::row_dot(std::size_t r, const std::uint64_t* x) const {
  const std::uint64_t* rw = row(r);
  std::uint64_t acc = 0;
  for (std::size_t w = 0; w < stride_; ++w) acc ^= rw[w] & x[w];
  return std::popcount(acc) & 1;
}

std::vector<std::uint64_t> BitMatrix::multiply(
    const std::vector<std::uint64_t>& x) const {
  if (x.size() != stride_) throw std::invalid_argument("multiply: bad operand width");
  std::vector<std::uint64_t> out((rows_ + 63) / 64, 0);
  for (std::size_t r = 0; r < rows_; ++r)
    if (row_dot(r, x.data())) out[r >> 6] |= std::uint64_t(1) << (r & 63);
  return out;
}

GaussianPseudoInverse gaussian_pseudo_inverse(const BitMatrix& c) {
  const std::size_t n = c.rows(), m = c.cols();
  BitMatrix work = c;
  BitMatrix z = BitMatrix::identity(n);
  std::size_t pivots = 0;
  for (std::size_t col = 0; col < m && pivots < n; ++col) {
    // first row at or below the pivot line with a 1 in this column
    std::size_t hit = n;
    for (std::size_t r = pivots; r < n; ++r) {
      if (work.get(r, col)) {
        hit = r;
        break;
      }
    }
    if (hit == n) continue;  // rank deficiency in this column; keep going
    work.swap_rows(pivots, hit);
    z.swap_rows(pivots, hit);
    for (std::size_t r = 0; r < n; ++r) {
      if (r != pivots && work.get(r, col)) {
        work.xor_row(r, pivots);
        z.xor_row(r, pivots);
      }
    }
    ++pivots;
  }
  GaussianPseudoInverse out;
  out.z = std::move(z);
  out.rank = static_cast<int>(pivots);
  out.kernel_rank = static_cast<int>(m - pivots);
  return out;
}

}  // namespace ipidlab
