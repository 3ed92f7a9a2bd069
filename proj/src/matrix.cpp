#include "segcn/matrix.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace segcn {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw std::invalid_argument("DenseMatrix: expected " + std::to_string(rows_ * cols_) +
                                " values, got " + std::to_string(values_.size()));
  }
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  if (!same_shape(other)) throw std::invalid_argument("DenseMatrix::operator+=: shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::uint64_t> offsets,
                           std::vector<std::uint32_t> columns, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(offsets)),
      columns_(std::move(columns)),
      values_(std::move(values)) {
  if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 ||
      offsets_.back() != columns_.size() || columns_.size() != values_.size()) {
    throw std::invalid_argument("SparseMatrix: inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (offsets_[r] > offsets_[r + 1]) {
      throw std::invalid_argument("SparseMatrix: offsets not monotone");
    }
    for (std::uint64_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      if (columns_[k] >= cols_) throw std::invalid_argument("SparseMatrix: column out of range");
      if (k > offsets_[r] && columns_[k] <= columns_[k - 1]) {
        throw std::invalid_argument("SparseMatrix: columns not strictly increasing in row " +
                                    std::to_string(r));
      }
    }
  }
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<std::uint64_t> offsets{0};
  std::vector<std::uint32_t> columns;
  std::vector<double> values;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) {
        columns.push_back(static_cast<std::uint32_t>(c));
        values.push_back(dense(r, c));
      }
    }
    offsets.push_back(columns.size());
  }
  return {dense.rows(), dense.cols(), std::move(offsets), std::move(columns), std::move(values)};
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix out(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::uint64_t k = offsets_[r]; k < offsets_[r + 1]; ++k) out(r, columns_[k]) = values_[k];
  }
  return out;
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
  if (values.size() != values_.size()) {
    throw std::invalid_argument("SparseMatrix::with_values: length mismatch");
  }
  SparseMatrix out = *this;
  out.values_ = std::move(values);
  return out;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto first = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[r]);
  auto last = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[r + 1]);
  auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - columns_.begin())];
}

}  // namespace segcn
