#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "segcn/graph.hpp"
#include "segcn/matrix.hpp"
#include "segcn/numerics.hpp"
#include "segcn/rng.hpp"

namespace segcn {

inline constexpr std::size_t kDefaultHidden = 16;

// Weights of the two-layer GCN: theta0 is F x H, theta1 is H x C. No biases.
struct GcnParams {
  DenseMatrix theta0;
  DenseMatrix theta1;

  std::size_t in_dim() const noexcept { return theta0.rows(); }
  std::size_t hidden_dim() const noexcept { return theta0.cols(); }
  std::size_t num_classes() const noexcept { return theta1.cols(); }

  friend bool operator==(const GcnParams&, const GcnParams&) = default;
};

GcnParams init_params(std::size_t in_dim, std::size_t hidden, std::size_t classes, Rng& rng);

struct GradParams {
  DenseMatrix grad_theta0;
  DenseMatrix grad_theta1;

  GradParams& operator+=(const GradParams& other);
  GradParams& operator*=(double s);
};

// Everything backward() needs to replay a forward pass. Masks are empty when
// the corresponding dropout was disabled.
struct ForwardTrace {
  DropoutMask input_mask;   // over the stored feature values
  DropoutMask hidden_mask;  // over the N x H hidden activations
  DenseMatrix hidden_pre;   // A X Theta0
  DenseMatrix hidden;       // ReLU(hidden_pre) after dropout
  DenseMatrix logits;       // A hidden Theta1
  DenseMatrix probs;        // row softmax of logits
};

// probs = softmax(A * drop(ReLU(A * drop(X) * theta0)) * theta1). Dropout is
// applied to the input of each layer; rate 0 disables it.
ForwardTrace forward(const GcnParams& params, const NormalizedAdjacency& a_hat,
                     const SparseMatrix& x, double dropout_rate, Rng& rng);

// Deterministic inference pass without dropout.
ForwardTrace forward(const GcnParams& params, const NormalizedAdjacency& a_hat,
                     const SparseMatrix& x);

// Parameter gradients of a scalar loss whose gradient w.r.t. the logits of
// `trace` is `grad_logits`.
GradParams backward(const ForwardTrace& trace, const GcnParams& params,
                    const NormalizedAdjacency& a_hat, const SparseMatrix& x,
                    const DenseMatrix& grad_logits);

enum class ModelRole : std::uint8_t { kStudent = 0, kTeacher = 1 };

std::string to_string(ModelRole role);

struct Checkpoint {
  GcnParams params;
  std::int64_t epoch = 0;
  ModelRole role = ModelRole::kStudent;
};

// Binary "SEGC1" container, little-endian: magic, u8 role, i64 epoch, then for
// theta0 and theta1 u64 rows, u64 cols and rows*cols f64 values row-major.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace segcn
