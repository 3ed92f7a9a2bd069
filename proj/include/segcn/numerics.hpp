#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "segcn/matrix.hpp"
#include "segcn/rng.hpp"

namespace segcn {

// Keep flags for inverted dropout. For a dense matrix there is one flag per
// entry (row-major); for a sparse matrix one flag per stored value.
struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double keep_prob = 1.0;

  bool empty() const noexcept { return keep.empty(); }
};

// Sparse-dense product a * x.
DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x);
// Sparse-transpose-dense product a^T * x.
DenseMatrix spmm_transposed(const SparseMatrix& a, const DenseMatrix& x);

// Same products with `mask` applied to the stored values of a; dropped entries
// are skipped. Equal to spmm(apply_mask(a, mask), x).
DenseMatrix spmm(const SparseMatrix& a, const DropoutMask& mask, const DenseMatrix& x);
DenseMatrix spmm_transposed(const SparseMatrix& a, const DropoutMask& mask, const DenseMatrix& x);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

// Numerically stable softmax over each row (max subtraction).
DenseMatrix row_softmax(const DenseMatrix& logits);

DenseMatrix relu(const DenseMatrix& x);

// Inverted dropout: each entry is zeroed with probability `rate`, survivors
// scaled by 1/(1-rate). rate must lie in [0, 1).
std::pair<DenseMatrix, DropoutMask> apply_dropout(const DenseMatrix& x, double rate, Rng& rng);
std::pair<SparseMatrix, DropoutMask> apply_dropout(const SparseMatrix& x, double rate, Rng& rng);

// Keep flags for n entries; rate 0 keeps everything without drawing.
DropoutMask sample_dropout_mask(std::size_t n, double rate, Rng& rng);

// Replays a stored mask.
DenseMatrix apply_mask(const DenseMatrix& x, const DropoutMask& mask);
SparseMatrix apply_mask(const SparseMatrix& x, const DropoutMask& mask);

// Glorot/Xavier uniform in [-s, s], s = sqrt(6 / (rows + cols)).
DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

// Index of the largest entry of each row; ties resolve to the lowest index.
std::vector<int> row_argmax(const DenseMatrix& m);

bool all_finite(const DenseMatrix& m);

}  // namespace segcn
