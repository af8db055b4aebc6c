#include "cough/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "cough/error.hpp"

namespace cough::ad {

namespace {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error("ShapeMismatch", msg);
}

// C += A(m,k) * B(k,n)
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C += A(m,k) * B(n,k)^T
void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C += A(k,m)^T * B(k,n)
void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double aip = arow[i];
      if (aip == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.v.assign(shape_size(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t;
  t.v.assign(shape_size(shape), value);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (shape_size(shape) != values.size())
    throw Error("ShapeMismatch", "tensor literal size does not match shape");
  Tensor t;
  t.shape = std::move(shape);
  t.v = std::move(values);
  return t;
}

Value Tape::push(Tensor value, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.grad = Tensor::zeros(n.value.shape);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Tape::constant(Tensor t) { return push(std::move(t)); }

Value Tape::leaf(Parameter& p) {
  Value v = push(p.value);
  nodes_.back().param = &p;
  return v;
}

void Tape::backward(Value out) {
  if (val(out).size() != 1) throw Error("NonScalarOutput", "backward needs a scalar output");
  for (auto& n : nodes_) std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
  nodes_[static_cast<std::size_t>(out.id)].grad.v[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (i > static_cast<std::size_t>(out.id)) continue;
    if (n.back) n.back();
    if (n.param != nullptr)
      for (std::size_t j = 0; j < n.grad.v.size(); ++j) n.param->grad.v[j] += n.grad.v[j];
  }
}

// ---- elementwise helpers --------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Value unary_op(Tape& t, Value a, Fwd fwd, Bwd dfn) {
  const Tensor& x = t.val(a);
  Tensor y = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = fwd(x.v[i]);
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, out, dfn] {
    const Tensor& go = t.grad_of(out);
    const Tensor& x = t.val(a);
    const Tensor& y = t.val(out);
    Tensor& ga = t.grad_of(a);
    for (std::size_t i = 0; i < go.v.size(); ++i) ga.v[i] += go.v[i] * dfn(x.v[i], y.v[i]);
  };
  return out;
}

}  // namespace

Value add(Tape& t, Value a, Value b) {
  require(t.val(a).same_shape(t.val(b)), "add shapes differ");
  Tensor y = t.val(a);
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += t.val(b).v[i];
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, b, out] {
    const Tensor& go = t.grad_of(out);
    for (std::size_t i = 0; i < go.v.size(); ++i) {
      t.grad_of(a).v[i] += go.v[i];
      t.grad_of(b).v[i] += go.v[i];
    }
  };
  return out;
}

Value sub(Tape& t, Value a, Value b) {
  require(t.val(a).same_shape(t.val(b)), "sub shapes differ");
  Tensor y = t.val(a);
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] -= t.val(b).v[i];
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, b, out] {
    const Tensor& go = t.grad_of(out);
    for (std::size_t i = 0; i < go.v.size(); ++i) {
      t.grad_of(a).v[i] += go.v[i];
      t.grad_of(b).v[i] -= go.v[i];
    }
  };
  return out;
}

Value mul(Tape& t, Value a, Value b) {
  require(t.val(a).same_shape(t.val(b)), "mul shapes differ");
  Tensor y = t.val(a);
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= t.val(b).v[i];
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, b, out] {
    const Tensor& go = t.grad_of(out);
    const Tensor& xa = t.val(a);
    const Tensor& xb = t.val(b);
    for (std::size_t i = 0; i < go.v.size(); ++i) {
      t.grad_of(a).v[i] += go.v[i] * xb.v[i];
      t.grad_of(b).v[i] += go.v[i] * xa.v[i];
    }
  };
  return out;
}

Value add_scalar(Tape& t, Value a, double c) {
  return unary_op(t, a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Value mul_scalar(Tape& t, Value a, double c) {
  return unary_op(t, a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Value sigmoid(Tape& t, Value a) {
  return unary_op(
      t, a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Value tanh_op(Tape& t, Value a) {
  return unary_op(t, a, [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Value relu(Tape& t, Value a) {
  return unary_op(t, a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value softplus(Tape& t, Value a) {
  return unary_op(t, a, [](double x) { return stable_softplus(x); },
                  [](double x, double) {
                    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                  });
}

Value exp_op(Tape& t, Value a) {
  return unary_op(t, a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Value log_op(Tape& t, Value a) {
  return unary_op(t, a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

// ---- shape ops --------------------------------------------------------------

Value matmul(Tape& t, Value a, Value b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  require(A.shape.size() == 2 && B.shape.size() == 2 && A.cols() == B.rows(),
          "matmul needs (m,k)x(k,n)");
  const int m = A.rows(), k = A.cols(), n = B.cols();
  Tensor y = Tensor::zeros({m, n});
  gemm_acc(A.v.data(), B.v.data(), y.v.data(), m, k, n);
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, b, out, m, k, n] {
    const Tensor& go = t.grad_of(out);
    // dA += dY * B^T ; dB += A^T * dY
    gemm_nt_acc(go.v.data(), t.val(b).v.data(), t.grad_of(a).v.data(), m, n, k);
    gemm_tn_acc(t.val(a).v.data(), go.v.data(), t.grad_of(b).v.data(), k, m, n);
  };
  return out;
}

Value matmul_nt(Tape& t, Value a, Value b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  require(A.shape.size() == 2 && B.shape.size() == 2 && A.cols() == B.cols(),
          "matmul_nt needs (m,k)x(n,k)");
  const int m = A.rows(), k = A.cols(), n = B.rows();
  Tensor y = Tensor::zeros({m, n});
  gemm_nt_acc(A.v.data(), B.v.data(), y.v.data(), m, k, n);
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, b, out, m, k, n] {
    const Tensor& go = t.grad_of(out);
    // dA += dY * B ; dB += dY^T * A
    gemm_acc(go.v.data(), t.val(b).v.data(), t.grad_of(a).v.data(), m, n, k);
    gemm_tn_acc(go.v.data(), t.val(a).v.data(), t.grad_of(b).v.data(), n, m, k);
  };
  return out;
}

Value transpose(Tape& t, Value a) {
  const Tensor& A = t.val(a);
  require(A.shape.size() == 2, "transpose needs a matrix");
  const int m = A.rows(), n = A.cols();
  Tensor y = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y.at(j, i) = A.at(i, j);
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, out, m, n] {
    const Tensor& go = t.grad_of(out);
    Tensor& ga = t.grad_of(a);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ga.at(i, j) += go.at(j, i);
  };
  return out;
}

Value sum_all(Tape& t, Value a) {
  const Tensor& A = t.val(a);
  double s = std::accumulate(A.v.begin(), A.v.end(), 0.0);
  Value out = t.push(Tensor::scalar(s));
  t.node(out).back = [&t, a, out] {
    const double go = t.grad_of(out).v[0];
    Tensor& ga = t.grad_of(a);
    for (double& g : ga.v) g += go;
  };
  return out;
}

Value mean_all(Tape& t, Value a) {
  const Tensor& A = t.val(a);
  const double inv = 1.0 / static_cast<double>(A.size());
  double s = std::accumulate(A.v.begin(), A.v.end(), 0.0) * inv;
  Value out = t.push(Tensor::scalar(s));
  t.node(out).back = [&t, a, out, inv] {
    const double go = t.grad_of(out).v[0] * inv;
    Tensor& ga = t.grad_of(a);
    for (double& g : ga.v) g += go;
  };
  return out;
}

Value sum_cols(Tape& t, Value a) {
  const Tensor& A = t.val(a);
  require(A.shape.size() == 2, "sum_cols needs a matrix");
  const int m = A.rows(), n = A.cols();
  Tensor y = Tensor::zeros({m, 1});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += A.at(i, j);
    y.v[static_cast<std::size_t>(i)] = s;
  }
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, out, m, n] {
    const Tensor& go = t.grad_of(out);
    Tensor& ga = t.grad_of(a);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ga.at(i, j) += go.v[static_cast<std::size_t>(i)];
  };
  return out;
}

Value slice_rows(Tape& t, Value a, int r0, int r1) {
  const Tensor& A = t.val(a);
  require(A.shape.size() == 2 && 0 <= r0 && r0 < r1 && r1 <= A.rows(), "bad slice_rows range");
  const int n = A.cols();
  Tensor y = Tensor::zeros({r1 - r0, n});
  std::copy(A.v.begin() + static_cast<std::ptrdiff_t>(r0) * n,
            A.v.begin() + static_cast<std::ptrdiff_t>(r1) * n, y.v.begin());
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, out, r0, n] {
    const Tensor& go = t.grad_of(out);
    Tensor& ga = t.grad_of(a);
    for (std::size_t i = 0; i < go.v.size(); ++i)
      ga.v[static_cast<std::size_t>(r0) * static_cast<std::size_t>(n) + i] += go.v[i];
  };
  return out;
}

Value concat_rows(Tape& t, std::span<const Value> xs) {
  require(!xs.empty(), "concat_rows of nothing");
  const int n = t.val(xs[0]).cols();
  int m = 0;
  for (Value x : xs) {
    require(t.val(x).shape.size() == 2 && t.val(x).cols() == n, "concat_rows width mismatch");
    m += t.val(x).rows();
  }
  Tensor y = Tensor::zeros({m, n});
  std::size_t off = 0;
  for (Value x : xs) {
    const Tensor& X = t.val(x);
    std::copy(X.v.begin(), X.v.end(), y.v.begin() + static_cast<std::ptrdiff_t>(off));
    off += X.v.size();
  }
  std::vector<Value> inputs(xs.begin(), xs.end());
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, inputs, out] {
    const Tensor& go = t.grad_of(out);
    std::size_t off = 0;
    for (Value x : inputs) {
      Tensor& gx = t.grad_of(x);
      for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += go.v[off + i];
      off += gx.v.size();
    }
  };
  return out;
}

Value concat_cols(Tape& t, std::span<const Value> xs) {
  require(!xs.empty(), "concat_cols of nothing");
  const int m = t.val(xs[0]).rows();
  int n = 0;
  for (Value x : xs) {
    require(t.val(x).shape.size() == 2 && t.val(x).rows() == m, "concat_cols height mismatch");
    n += t.val(x).cols();
  }
  Tensor y = Tensor::zeros({m, n});
  int col0 = 0;
  for (Value x : xs) {
    const Tensor& X = t.val(x);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < X.cols(); ++j) y.at(i, col0 + j) = X.at(i, j);
    col0 += X.cols();
  }
  std::vector<Value> inputs(xs.begin(), xs.end());
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, inputs, out, m] {
    const Tensor& go = t.grad_of(out);
    int col0 = 0;
    for (Value x : inputs) {
      Tensor& gx = t.grad_of(x);
      const int w = gx.cols();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) gx.at(i, j) += go.at(i, col0 + j);
      col0 += w;
    }
  };
  return out;
}

Value add_bias_col(Tape& t, Value a, Value bias) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(bias);
  require(A.shape.size() == 2 && static_cast<int>(B.size()) == A.rows(), "bias length != rows");
  Tensor y = A;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) y.at(i, j) += B.v[static_cast<std::size_t>(i)];
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, bias, out] {
    const Tensor& go = t.grad_of(out);
    Tensor& ga = t.grad_of(a);
    Tensor& gb = t.grad_of(bias);
    for (int i = 0; i < go.rows(); ++i)
      for (int j = 0; j < go.cols(); ++j) {
        ga.at(i, j) += go.at(i, j);
        gb.v[static_cast<std::size_t>(i)] += go.at(i, j);
      }
  };
  return out;
}

Value add_bias_row(Tape& t, Value a, Value bias) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(bias);
  require(A.shape.size() == 2 && static_cast<int>(B.size()) == A.cols(), "bias length != cols");
  Tensor y = A;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) y.at(i, j) += B.v[static_cast<std::size_t>(j)];
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, a, bias, out] {
    const Tensor& go = t.grad_of(out);
    Tensor& ga = t.grad_of(a);
    Tensor& gb = t.grad_of(bias);
    for (int i = 0; i < go.rows(); ++i)
      for (int j = 0; j < go.cols(); ++j) {
        ga.at(i, j) += go.at(i, j);
        gb.v[static_cast<std::size_t>(j)] += go.at(i, j);
      }
  };
  return out;
}

Value conv1d(Tape& t, Value x, Value w) { return conv1d(t, x, w, Value{-1}); }

Value conv1d(Tape& t, Value x, Value w, Value bias) {
  const Tensor& X = t.val(x);
  const Tensor& W = t.val(w);
  require(X.shape.size() == 3 && W.shape.size() == 3, "conv1d needs (B,Cin,L) and (Cout,Cin,K)");
  const int B = X.dim(0), cin = X.dim(1), L = X.dim(2);
  const int cout = W.dim(0), K = W.dim(2);
  require(W.dim(1) == cin, "conv1d channel mismatch");
  require(K % 2 == 1, "conv1d kernel length must be odd for same padding");
  const bool has_bias = bias.id >= 0;
  if (has_bias) require(static_cast<int>(t.val(bias).size()) == cout, "conv1d bias length");
  const int pad = (K - 1) / 2;

  Tensor y = Tensor::zeros({B, cout, L});
  auto xat = [&](int b, int c, int l) {
    return X.v[(static_cast<std::size_t>(b) * cin + c) * L + l];
  };
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < cout; ++co) {
      const double bval = has_bias ? t.val(bias).v[static_cast<std::size_t>(co)] : 0.0;
      for (int l = 0; l < L; ++l) {
        double acc = bval;
        for (int ci = 0; ci < cin; ++ci)
          for (int k = 0; k < K; ++k) {
            const int src = l + k - pad;
            if (src < 0 || src >= L) continue;
            acc += xat(b, ci, src) * W.v[(static_cast<std::size_t>(co) * cin + ci) * K + k];
          }
        y.v[(static_cast<std::size_t>(b) * cout + co) * L + l] = acc;
      }
    }
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, x, w, bias, out, B, cin, cout, L, K, pad, has_bias] {
    const Tensor& go = t.grad_of(out);
    const Tensor& X = t.val(x);
    const Tensor& W = t.val(w);
    Tensor& gx = t.grad_of(x);
    Tensor& gw = t.grad_of(w);
    for (int b = 0; b < B; ++b)
      for (int co = 0; co < cout; ++co)
        for (int l = 0; l < L; ++l) {
          const double g = go.v[(static_cast<std::size_t>(b) * cout + co) * L + l];
          if (g == 0.0) continue;
          for (int ci = 0; ci < cin; ++ci)
            for (int k = 0; k < K; ++k) {
              const int src = l + k - pad;
              if (src < 0 || src >= L) continue;
              const std::size_t xi = (static_cast<std::size_t>(b) * cin + ci) * L + src;
              const std::size_t wi = (static_cast<std::size_t>(co) * cin + ci) * K + k;
              gx.v[xi] += g * W.v[wi];
              gw.v[wi] += g * X.v[xi];
            }
        }
    if (has_bias) {
      Tensor& gb = t.grad_of(bias);
      for (int b = 0; b < B; ++b)
        for (int co = 0; co < cout; ++co)
          for (int l = 0; l < L; ++l)
            gb.v[static_cast<std::size_t>(co)] +=
                go.v[(static_cast<std::size_t>(b) * cout + co) * L + l];
    }
  };
  return out;
}

Value pool_mean_last(Tape& t, Value x) {
  const Tensor& X = t.val(x);
  require(X.shape.size() == 3, "pool_mean_last needs (B,C,L)");
  const int B = X.dim(0), C = X.dim(1), L = X.dim(2);
  Tensor y = Tensor::zeros({B, C});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int l = 0; l < L; ++l) s += X.v[(static_cast<std::size_t>(b) * C + c) * L + l];
      y.at(b, c) = s / L;
    }
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, x, out, B, C, L] {
    const Tensor& go = t.grad_of(out);
    Tensor& gx = t.grad_of(x);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const double g = go.at(b, c) / L;
        for (int l = 0; l < L; ++l) gx.v[(static_cast<std::size_t>(b) * C + c) * L + l] += g;
      }
  };
  return out;
}

Value batchnorm1d(Tape& t, Value x, Value gamma, Value beta, BatchNormState& state,
                  bool training) {
  const Tensor& X = t.val(x);
  require(X.shape.size() == 2 || X.shape.size() == 3, "batchnorm1d needs (B,C) or (B,C,L)");
  const int B = X.dim(0);
  const int C = X.dim(1);
  const int L = X.shape.size() == 3 ? X.dim(2) : 1;
  require(static_cast<int>(t.val(gamma).size()) == C && static_cast<int>(t.val(beta).size()) == C,
          "batchnorm1d affine size");
  require(static_cast<int>(state.running_mean.size()) == C, "batchnorm1d state size");

  const std::size_t M = static_cast<std::size_t>(B) * static_cast<std::size_t>(L);
  auto idx = [&](int b, int c, int l) {
    return (static_cast<std::size_t>(b) * C + c) * L + l;
  };

  std::vector<double> mean(static_cast<std::size_t>(C), 0.0),
      var(static_cast<std::size_t>(C), 0.0);
  if (training) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) s += X.v[idx(b, c, l)];
      mean[static_cast<std::size_t>(c)] = s / static_cast<double>(M);
      double v = 0.0;
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) {
          const double d = X.v[idx(b, c, l)] - mean[static_cast<std::size_t>(c)];
          v += d * d;
        }
      var[static_cast<std::size_t>(c)] = v / static_cast<double>(M);
      state.running_mean[static_cast<std::size_t>(c)] =
          (1.0 - state.momentum) * state.running_mean[static_cast<std::size_t>(c)] +
          state.momentum * mean[static_cast<std::size_t>(c)];
      state.running_var[static_cast<std::size_t>(c)] =
          (1.0 - state.momentum) * state.running_var[static_cast<std::size_t>(c)] +
          state.momentum * var[static_cast<std::size_t>(c)];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  std::vector<double> invstd(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c)
    invstd[static_cast<std::size_t>(c)] =
        1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + state.eps);

  Tensor y = Tensor::zeros(X.shape);
  auto xhat = std::make_shared<std::vector<double>>(X.v.size());
  const Tensor& G = t.val(gamma);
  const Tensor& Bt = t.val(beta);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int l = 0; l < L; ++l) {
        const std::size_t i = idx(b, c, l);
        const double xh = (X.v[i] - mean[static_cast<std::size_t>(c)]) *
                          invstd[static_cast<std::size_t>(c)];
        (*xhat)[i] = xh;
        y.v[i] = G.v[static_cast<std::size_t>(c)] * xh + Bt.v[static_cast<std::size_t>(c)];
      }
  Value out = t.push(std::move(y));
  t.node(out).back = [&t, x, gamma, beta, out, B, C, L, M, xhat, invstd, training] {
    const Tensor& go = t.grad_of(out);
    const Tensor& G = t.val(gamma);
    Tensor& gx = t.grad_of(x);
    Tensor& gg = t.grad_of(gamma);
    Tensor& gb = t.grad_of(beta);
    auto idx = [C, L](int b, int c, int l) {
      return (static_cast<std::size_t>(b) * C + c) * L + l;
    };
    for (int c = 0; c < C; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) {
          const std::size_t i = idx(b, c, l);
          sum_dy += go.v[i];
          sum_dy_xhat += go.v[i] * (*xhat)[i];
        }
      gg.v[static_cast<std::size_t>(c)] += sum_dy_xhat;
      gb.v[static_cast<std::size_t>(c)] += sum_dy;
      const double g = G.v[static_cast<std::size_t>(c)];
      const double is = invstd[static_cast<std::size_t>(c)];
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) {
          const std::size_t i = idx(b, c, l);
          if (training) {
            gx.v[i] += g * is *
                       (go.v[i] - sum_dy / static_cast<double>(M) -
                        (*xhat)[i] * sum_dy_xhat / static_cast<double>(M));
          } else {
            gx.v[i] += g * is * go.v[i];
          }
        }
    }
  };
  return out;
}

Value softmax_ce(Tape& t, Value logits, std::span<const int> labels,
                 std::span<const double> weights) {
  const Tensor& X = t.val(logits);
  require(X.shape.size() == 2, "softmax_ce needs (N,C) logits");
  const int N = X.rows(), C = X.cols();
  require(static_cast<int>(labels.size()) == N && static_cast<int>(weights.size()) == N,
          "softmax_ce label/weight count");
  for (int y : labels)
    if (y < 0 || y >= C) throw Error("BadLabel", "label " + std::to_string(y) + " out of range");

  auto probs = std::make_shared<std::vector<double>>(X.v.size());
  double wsum = 0.0, loss = 0.0;
  for (int n = 0; n < N; ++n) {
    double m = X.at(n, 0);
    for (int c = 1; c < C; ++c) m = std::max(m, X.at(n, c));
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(X.at(n, c) - m);
    const double lse = m + std::log(z);
    for (int c = 0; c < C; ++c)
      (*probs)[static_cast<std::size_t>(n) * C + c] = std::exp(X.at(n, c) - lse);
    loss += weights[static_cast<std::size_t>(n)] *
            (lse - X.at(n, labels[static_cast<std::size_t>(n)]));
    wsum += weights[static_cast<std::size_t>(n)];
  }
  require(wsum > 0.0, "softmax_ce needs positive total weight");
  loss /= wsum;

  std::vector<int> labels_copy(labels.begin(), labels.end());
  std::vector<double> weights_copy(weights.begin(), weights.end());
  Value out = t.push(Tensor::scalar(loss));
  t.node(out).back = [&t, logits, out, probs, labels_copy, weights_copy, wsum, N, C] {
    const double go = t.grad_of(out).v[0];
    Tensor& gx = t.grad_of(logits);
    for (int n = 0; n < N; ++n) {
      const double w = weights_copy[static_cast<std::size_t>(n)] / wsum;
      for (int c = 0; c < C; ++c) {
        const double p = (*probs)[static_cast<std::size_t>(n) * C + c];
        const double ind = c == labels_copy[static_cast<std::size_t>(n)] ? 1.0 : 0.0;
        gx.at(n, c) += go * w * (p - ind);
      }
    }
  };
  return out;
}

Value gaussian_sample(Tape& t, Value mu, Value logvar, const Tensor& eps) {
  require(t.val(mu).same_shape(t.val(logvar)) && t.val(mu).same_shape(eps),
          "gaussian_sample shapes differ");
  Value sigma = exp_op(t, mul_scalar(t, logvar, 0.5));
  return add(t, mu, mul(t, sigma, t.constant(eps)));
}

GradCheckReport grad_check(const std::function<Value(Tape&)>& build,
                           std::span<Parameter* const> params, double h) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Value out = build(tape);
    tape.backward(out);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Tape tape;
    return tape.scalar(build(tape));
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    GradCheckEntry entry;
    entry.param_name = p.name;
    for (std::size_t i = 0; i < p.value.v.size(); ++i) {
      const double saved = p.value.v[i];
      p.value.v[i] = saved + h;
      const double fp = eval();
      p.value.v[i] = saved - h;
      const double fm = eval();
      p.value.v[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi].v[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace cough::ad
