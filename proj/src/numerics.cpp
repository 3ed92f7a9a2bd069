#include "segcn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace segcn {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

}  // namespace

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x) {
  require(a.cols() == x.rows(), "spmm: dimension mismatch");
  const std::size_t f = x.cols();
  DenseMatrix out(a.rows(), f);
  const auto& cols = a.columns();
  const auto& vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* dst = out.row(r).data();
    for (std::uint64_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      const double w = vals[k];
      const double* src = x.row(cols[k]).data();
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix spmm_transposed(const SparseMatrix& a, const DenseMatrix& x) {
  require(a.rows() == x.rows(), "spmm_transposed: dimension mismatch");
  const std::size_t f = x.cols();
  DenseMatrix out(a.cols(), f);
  const auto& cols = a.columns();
  const auto& vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* src = x.row(r).data();
    for (std::uint64_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      const double w = vals[k];
      if (w == 0.0) continue;
      double* dst = out.row(cols[k]).data();
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix spmm(const SparseMatrix& a, const DropoutMask& mask, const DenseMatrix& x) {
  require(a.cols() == x.rows(), "spmm: dimension mismatch");
  require(mask.keep.size() == a.nnz(), "spmm: mask shape mismatch");
  const std::size_t f = x.cols();
  const double scale = 1.0 / mask.keep_prob;
  DenseMatrix out(a.rows(), f);
  const auto& cols = a.columns();
  const auto& vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* dst = out.row(r).data();
    for (std::uint64_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      if (!mask.keep[k]) continue;
      const double w = vals[k] * scale;
      const double* src = x.row(cols[k]).data();
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix spmm_transposed(const SparseMatrix& a, const DropoutMask& mask, const DenseMatrix& x) {
  require(a.rows() == x.rows(), "spmm_transposed: dimension mismatch");
  require(mask.keep.size() == a.nnz(), "spmm_transposed: mask shape mismatch");
  const std::size_t f = x.cols();
  const double scale = 1.0 / mask.keep_prob;
  DenseMatrix out(a.cols(), f);
  const auto& cols = a.columns();
  const auto& vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* src = x.row(r).data();
    for (std::uint64_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      if (!mask.keep[k]) continue;
      const double w = vals[k] * scale;
      if (w == 0.0) continue;
      double* dst = out.row(cols[k]).data();
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double w = a(i, k);
      if (w == 0.0) continue;
      const double* src = b.row(k).data();
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: dimension mismatch");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* src = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double w = a(r, i);
      if (w == 0.0) continue;
      double* dst = out.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: dimension mismatch");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

DenseMatrix row_softmax(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto in = logits.row(r);
    auto dst = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - mx);
      sum += dst[c];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

DenseMatrix relu(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

DropoutMask sample_dropout_mask(std::size_t n, double rate, Rng& rng) {
  check_rate(rate);
  DropoutMask mask{std::vector<std::uint8_t>(n, 1), 1.0 - rate};
  if (rate > 0.0) {
    // Two 32-bit uniforms per engine draw; an entry is dropped when its draw
    // falls below rate * 2^32.
    const auto cut = static_cast<std::uint64_t>(std::ceil(rate * 0x1.0p32));
    std::size_t i = 0;
    for (; i + 1 < n; i += 2) {
      const std::uint64_t bits = rng.next();
      mask.keep[i] = static_cast<std::uint8_t>((bits & 0xFFFFFFFFu) >= cut);
      mask.keep[i + 1] = static_cast<std::uint8_t>((bits >> 32) >= cut);
    }
    if (i < n) mask.keep[i] = static_cast<std::uint8_t>((rng.next() & 0xFFFFFFFFu) >= cut);
  }
  return mask;
}

std::pair<DenseMatrix, DropoutMask> apply_dropout(const DenseMatrix& x, double rate, Rng& rng) {
  DropoutMask mask = sample_dropout_mask(x.size(), rate, rng);
  DenseMatrix out = apply_mask(x, mask);
  return {std::move(out), std::move(mask)};
}

std::pair<SparseMatrix, DropoutMask> apply_dropout(const SparseMatrix& x, double rate, Rng& rng) {
  DropoutMask mask = sample_dropout_mask(x.nnz(), rate, rng);
  SparseMatrix out = apply_mask(x, mask);
  return {std::move(out), std::move(mask)};
}

DenseMatrix apply_mask(const DenseMatrix& x, const DropoutMask& mask) {
  require(mask.keep.size() == x.size(), "apply_mask: mask shape mismatch");
  const double scale = 1.0 / mask.keep_prob;
  DenseMatrix out = x;
  auto& v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask.keep[i] ? v[i] * scale : 0.0;
  return out;
}

SparseMatrix apply_mask(const SparseMatrix& x, const DropoutMask& mask) {
  require(mask.keep.size() == x.nnz(), "apply_mask: mask shape mismatch");
  const double scale = 1.0 / mask.keep_prob;
  std::vector<double> v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask.keep[i] ? v[i] * scale : 0.0;
  return x.with_values(std::move(v));
}

DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
  require(rows >= 1 && cols >= 1, "glorot_init: empty shape");
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix out(rows, cols);
  for (double& v : out.values()) v = -s + 2.0 * s * rng.uniform();
  return out;
}

std::vector<int> row_argmax(const DenseMatrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

bool all_finite(const DenseMatrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace segcn
