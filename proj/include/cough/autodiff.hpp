#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cough::ad {

// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);

  std::size_t size() const { return v.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rows() const { return shape[0]; }
  int cols() const { return shape[1]; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Trainable tensor with a persistent gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor t) : name(std::move(n)), value(std::move(t)) {
    grad = Tensor::zeros(value.shape);
  }
  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

struct Value {
  int id = -1;
};

// Record of one forward pass. Nodes are created in topological order;
// backward() visits them exactly once in reverse.
class Tape {
 public:
  Value constant(Tensor t);
  Value leaf(Parameter& p);

  const Tensor& val(Value x) const { return nodes_[static_cast<std::size_t>(x.id)].value; }
  Tensor& grad_of(Value x) { return nodes_[static_cast<std::size_t>(x.id)].grad; }
  double scalar(Value x) const { return val(x).v[0]; }

  // Accumulates d(out)/d(p) into every leaf parameter's grad. out must be scalar.
  void backward(Value out);

  std::size_t n_nodes() const { return nodes_.size(); }

  // op builders use these directly
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> back;
    Parameter* param = nullptr;
  };
  Value push(Tensor value, std::function<void()> back = {});
  Node& node(Value x) { return nodes_[static_cast<std::size_t>(x.id)]; }

 private:
  std::vector<Node> nodes_;
};

// ---- primitive operations ----------------------------------------------

Value matmul(Tape& t, Value a, Value b);     // (m,k) x (k,n)
Value matmul_nt(Tape& t, Value a, Value b);  // (m,k) x (n,k)^T -> (m,n)
Value transpose(Tape& t, Value a);
Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);  // elementwise
Value add_scalar(Tape& t, Value a, double c);
Value mul_scalar(Tape& t, Value a, double c);
Value sigmoid(Tape& t, Value a);
Value tanh_op(Tape& t, Value a);
Value relu(Tape& t, Value a);  // derivative at 0 defined as 0
Value softplus(Tape& t, Value a);
Value exp_op(Tape& t, Value a);
Value log_op(Tape& t, Value a);
Value sum_all(Tape& t, Value a);
Value mean_all(Tape& t, Value a);
Value sum_cols(Tape& t, Value a);                    // (R,C) -> (R,1)
Value slice_rows(Tape& t, Value a, int r0, int r1);  // rows [r0, r1)
Value concat_rows(Tape& t, std::span<const Value> xs);
Value concat_cols(Tape& t, std::span<const Value> xs);
Value add_bias_col(Tape& t, Value a, Value bias);  // (R,C) + (R): out[r,c] = a[r,c] + bias[r]
Value add_bias_row(Tape& t, Value a, Value bias);  // (R,C) + (C): out[r,c] = a[r,c] + bias[c]

// stride-1 1-D convolution with symmetric zero padding (odd kernel):
// x (B,Cin,L), w (Cout,Cin,K), optional bias (Cout) -> (B,Cout,L)
Value conv1d(Tape& t, Value x, Value w);
Value conv1d(Tape& t, Value x, Value w, Value bias);

Value pool_mean_last(Tape& t, Value x);  // (B,C,L) -> (B,C)

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;  // biased, matching normalization stats
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(int channels = 0)
      : running_mean(static_cast<std::size_t>(channels), 0.0),
        running_var(static_cast<std::size_t>(channels), 1.0) {}
};

// x (B,C) or (B,C,L); per-channel normalization over batch (and length).
// Training mode uses batch stats and updates the running ones.
Value batchnorm1d(Tape& t, Value x, Value gamma, Value beta, BatchNormState& state, bool training);

// Fused softmax + cross-entropy, weighted mean over samples:
// logits (N,C), labels[n] in [0,C), loss = sum w_n * nll_n / sum w_n.
Value softmax_ce(Tape& t, Value logits, std::span<const int> labels,
                 std::span<const double> weights);

// Reparameterized diagonal-Gaussian sample z = mu + exp(logvar/2) * eps.
// eps is recorded as a constant, so backward treats it as frozen noise.
Value gaussian_sample(Tape& t, Value mu, Value logvar, const Tensor& eps);

// ---- finite-difference gradient checking --------------------------------

struct GradCheckEntry {
  std::string param_name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool passed(double tol) const { return max_rel_err < tol; }
};

// Central differences against the analytic gradient of a scalar-valued
// build function. The build must be deterministic given the parameters
// (freeze any sampling noise). Relative error denominator is
// max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const std::function<Value(Tape&)>& build,
                           std::span<Parameter* const> params, double h = 1e-5);

}  // namespace cough::ad
