#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ipidlab {

// Dense matrix over GF(2), row-major. Within a row, column c sits at word c/64,
// bit c%64 (LSB-first packing; this is internal layout, unrelated to BitVec's
// MSB-first external indexing). Row operations are whole-word XORs so the
// elimination below runs in multi-word strides, no bignum involved.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), stride_((cols + 63) / 64),
        words_(rows * stride_, 0) {}

  static BitMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t stride() const { return stride_; }

  bool get(std::size_t r, std::size_t c) const {
    return (words_[r * stride_ + (c >> 6)] >> (c & 63)) & 1u;
  }
  void set(std::size_t r, std::size_t c, bool v) {
    std::uint64_t& w = words_[r * stride_ + (c >> 6)];
    const std::uint64_t m = std::uint64_t(1) << (c & 63);
    if (v)
      w |= m;
    else
      w &= ~m;
  }

  const std::uint64_t* row(std::size_t r) const { return words_.data() + r * stride_; }
  std::uint64_t* row(std::size_t r) { return words_.data() + r * stride_; }

  void xor_row(std::size_t dst, std::size_t src) {
    std::uint64_t* d = row(dst);
    const std::uint64_t* s = row(src);
    for (std::size_t w = 0; w < stride_; ++w) d[w] ^= s[w];
  }
  void swap_rows(std::size_t a, std::size_t b);

  // Parity of <row r, x>; x packed like a row of matching width.
  bool row_dot(std::size_t r, const std::uint64_t* x) const;

  // y = M x over GF(2); x has cols() entries, result rows() entries. Packed
  // LSB-first like rows. Used at API boundaries and in tests; hot paths keep
  // their own packed words.
  std::vector<std::uint64_t> multiply(const std::vector<std::uint64_t>& x) const;

  friend bool operator==(const BitMatrix& a, const BitMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.words_ == b.words_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0, stride_ = 0;
  std::vector<std::uint64_t> words_;
};

// Row-reduction bookkeeping for an n x m system (n >= m expected). Z is the
// accumulated row-operation matrix (n x n): Z*C has the identity on the pivot
// columns in its first `rank` rows and zeros in the remaining n-rank rows. When
// rank == m that is exactly [I_m; 0], so for any right-hand side b consistent
// with C x = b, the first m entries of Z*b are x and the trailing n-rank entries
// vanish; the trailing entries act as the consistency filter. Never fails on
// rank-deficient input -- rank and kernel_rank (= m - rank) report it instead.
struct GaussianPseudoInverse {
  BitMatrix z;
  int rank = 0;
  int kernel_rank = 0;
};

GaussianPseudoInverse gaussian_pseudo_inverse(const BitMatrix& c);

}  // namespace ipidlab
