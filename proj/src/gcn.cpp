#include "segcn/gcn.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace segcn {

GcnParams init_params(std::size_t in_dim, std::size_t hidden, std::size_t classes, Rng& rng) {
  GcnParams p;
  p.theta0 = glorot_init(in_dim, hidden, rng);
  p.theta1 = glorot_init(hidden, classes, rng);
  return p;
}

GradParams& GradParams::operator+=(const GradParams& other) {
  grad_theta0 += other.grad_theta0;
  grad_theta1 += other.grad_theta1;
  return *this;
}

GradParams& GradParams::operator*=(double s) {
  grad_theta0 *= s;
  grad_theta1 *= s;
  return *this;
}

namespace {

void check_shapes(const GcnParams& params, const NormalizedAdjacency& a_hat,
                  const SparseMatrix& x) {
  if (a_hat.matrix.rows() != x.rows() || a_hat.matrix.cols() != x.rows()) {
    throw std::invalid_argument("gcn: adjacency is " + std::to_string(a_hat.matrix.rows()) +
                                "x" + std::to_string(a_hat.matrix.cols()) + " but features have " +
                                std::to_string(x.rows()) + " rows");
  }
  if (params.theta0.rows() != x.cols()) {
    throw std::invalid_argument("gcn: theta0 expects " + std::to_string(params.theta0.rows()) +
                                " features, got " + std::to_string(x.cols()));
  }
  if (params.theta1.rows() != params.theta0.cols()) {
    throw std::invalid_argument("gcn: theta0/theta1 hidden dimension mismatch");
  }
}

}  // namespace

ForwardTrace forward(const GcnParams& params, const NormalizedAdjacency& a_hat,
                     const SparseMatrix& x, double dropout_rate, Rng& rng) {
  check_shapes(params, a_hat, x);
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("forward: dropout rate must lie in [0, 1)");
  }
  ForwardTrace t;
  DenseMatrix xw;
  if (dropout_rate > 0.0) {
    t.input_mask = sample_dropout_mask(x.nnz(), dropout_rate, rng);
    xw = spmm(x, t.input_mask, params.theta0);
  } else {
    xw = spmm(x, params.theta0);
  }
  t.hidden_pre = spmm(a_hat.matrix, xw);
  DenseMatrix h = relu(t.hidden_pre);
  if (dropout_rate > 0.0) {
    auto [dropped, mask] = apply_dropout(h, dropout_rate, rng);
    t.hidden_mask = std::move(mask);
    t.hidden = std::move(dropped);
  } else {
    t.hidden = std::move(h);
  }
  t.logits = spmm(a_hat.matrix, matmul(t.hidden, params.theta1));
  t.probs = row_softmax(t.logits);
  return t;
}

ForwardTrace forward(const GcnParams& params, const NormalizedAdjacency& a_hat,
                     const SparseMatrix& x) {
  Rng unused(0);
  return forward(params, a_hat, x, 0.0, unused);
}

GradParams backward(const ForwardTrace& trace, const GcnParams& params,
                    const NormalizedAdjacency& a_hat, const SparseMatrix& x,
                    const DenseMatrix& grad_logits) {
  check_shapes(params, a_hat, x);
  if (grad_logits.rows() != trace.logits.rows() || grad_logits.cols() != trace.logits.cols()) {
    throw std::invalid_argument("backward: grad_logits shape does not match trace");
  }
  if (trace.hidden.rows() != x.rows() || trace.hidden.cols() != params.hidden_dim() ||
      trace.logits.cols() != params.num_classes()) {
    throw std::invalid_argument("backward: trace does not match parameters");
  }

  // logits = A (H~ theta1); A is symmetric so A^T = A.
  const DenseMatrix grad_q = spmm(a_hat.matrix, grad_logits);
  GradParams g;
  g.grad_theta1 = matmul_tn(trace.hidden, grad_q);
  DenseMatrix grad_h = matmul_nt(grad_q, params.theta1);
  if (!trace.hidden_mask.empty()) grad_h = apply_mask(grad_h, trace.hidden_mask);
  auto& gh = grad_h.values();
  const auto& pre = trace.hidden_pre.values();
  for (std::size_t i = 0; i < gh.size(); ++i) {
    if (pre[i] <= 0.0) gh[i] = 0.0;
  }
  const DenseMatrix grad_p = spmm(a_hat.matrix, grad_h);
  if (!trace.input_mask.empty()) {
    g.grad_theta0 = spmm_transposed(x, trace.input_mask, grad_p);
  } else {
    g.grad_theta0 = spmm_transposed(x, grad_p);
  }
  return g;
}

std::string to_string(ModelRole role) {
  return role == ModelRole::kTeacher ? "teacher" : "student";
}

namespace {

constexpr char kCheckpointMagic[5] = {'S', 'E', 'G', 'C', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  std::uint64_t u;
  if constexpr (std::is_floating_point_v<T>) {
    u = std::bit_cast<std::uint64_t>(static_cast<double>(value));
  } else {
    u = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T read_le(std::istream& in) {
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("checkpoint: unexpected end of file");
    u |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<double>(u);
  } else {
    return static_cast<T>(u);
  }
}

void write_matrix(std::ostream& out, const DenseMatrix& m) {
  write_le<std::uint64_t>(out, m.rows());
  write_le<std::uint64_t>(out, m.cols());
  for (double v : m.values()) write_le<double>(out, v);
}

DenseMatrix read_matrix(std::istream& in) {
  const auto rows = read_le<std::uint64_t>(in);
  const auto cols = read_le<std::uint64_t>(in);
  if (rows == 0 || cols == 0 || rows > (1ULL << 32) || cols > (1ULL << 32)) {
    throw std::runtime_error("checkpoint: implausible matrix shape");
  }
  std::vector<double> values(rows * cols);
  for (double& v : values) v = read_le<double>(in);
  return {rows, cols, std::move(values)};
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.role));
  write_le<std::int64_t>(out, ckpt.epoch);
  write_matrix(out, ckpt.params.theta0);
  write_matrix(out, ckpt.params.theta1);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  Checkpoint ckpt;
  const auto role = read_le<std::uint8_t>(in);
  if (role > 1) throw std::runtime_error("checkpoint: unknown role");
  ckpt.role = static_cast<ModelRole>(role);
  ckpt.epoch = read_le<std::int64_t>(in);
  ckpt.params.theta0 = read_matrix(in);
  ckpt.params.theta1 = read_matrix(in);
  if (ckpt.params.theta0.cols() != ckpt.params.theta1.rows()) {
    throw std::runtime_error("checkpoint: theta0/theta1 shapes do not chain");
  }
  return ckpt;
}

}  // namespace segcn
