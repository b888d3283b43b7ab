#include "core/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "core/error.hpp"

namespace agman::ops {

namespace {

using CMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->val().same_shape(b->val())) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + Tensor::shape_str(a->val().shape()) + " vs " +
                        Tensor::shape_str(b->val().shape()));
  }
}

// Unary elementwise op; dmul computes dy/dx from (x, y).
template <typename F, typename D>
Var unary(Tape& t, const Var& x, F f, D dmul) {
  const Tensor& xv = x->val();
  Tensor out(xv.shape());
  for (long i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return t.make(std::move(out), {x}, [x, dmul](Node& n) {
    if (!x->requires_grad) return;
    Tensor& gx = x->grad_acc();
    const Tensor& xv = x->val();
    const Tensor& yv = n.value;
    for (long i = 0; i < xv.size(); ++i) gx[i] += n.grad[i] * dmul(xv[i], yv[i]);
  });
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, long m, long k, long n, bool accumulate) {
  CMap A(a, m, k), B(b, k, n);
  MMap C(c, m, n);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

void gemm_nt(const double* a, const double* b, double* c, long m, long k, long n, bool accumulate) {
  CMap A(a, m, k), B(b, n, k);
  MMap C(c, m, n);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

void gemm_tn(const double* a, const double* b, double* c, long m, long k, long n, bool accumulate) {
  CMap A(a, k, m), B(b, k, n);
  MMap C(c, m, n);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

Var add(Tape& t, const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a->val().shape());
  for (long i = 0; i < out.size(); ++i) out[i] = a->val()[i] + b->val()[i];
  return t.make(std::move(out), {a, b}, [a, b](Node& n) {
    for (const Var& p : {a, b}) {
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(Tape& t, const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a->val().shape());
  for (long i = 0; i < out.size(); ++i) out[i] = a->val()[i] - b->val()[i];
  return t.make(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& g = a->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(Tape& t, const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a->val().shape());
  for (long i = 0; i < out.size(); ++i) out[i] = a->val()[i] * b->val()[i];
  return t.make(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& g = a->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i] * b->val()[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i] * a->val()[i];
    }
  });
}

Var div(Tape& t, const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out(a->val().shape());
  for (long i = 0; i < out.size(); ++i) out[i] = a->val()[i] / b->val()[i];
  return t.make(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& g = a->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i] / b->val()[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] -= n.grad[i] * a->val()[i] / (b->val()[i] * b->val()[i]);
    }
  });
}

Var scale(Tape& t, const Var& x, double s) {
  Tensor out(x->val().shape());
  for (long i = 0; i < out.size(); ++i) out[i] = x->val()[i] * s;
  return t.make(std::move(out), {x}, [x, s](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i] * s;
  });
}

Var add_const(Tape& t, const Var& x, double c) {
  Tensor out(x->val().shape());
  for (long i = 0; i < out.size(); ++i) out[i] = x->val()[i] + c;
  return t.make(std::move(out), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

Var relu(Tape& t, const Var& x) {
  // NaN propagates instead of being masked to 0, so poisoned values surface
  // in downstream finiteness checks.
  return unary(
      t, x, [](double v) { return v > 0 ? v : (std::isnan(v) ? v : 0.0); },
      [](double xv, double) { return xv > 0 ? 1.0 : 0.0; });
}

Var tanh_op(Tape& t, const Var& x) {
  return unary(
      t, x, [](double v) { return std::tanh(v); }, [](double, double yv) { return 1.0 - yv * yv; });
}

Var sigmoid(Tape& t, const Var& x) {
  auto sig = [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return unary(t, x, sig, [](double, double yv) { return yv * (1.0 - yv); });
}

Var exp_op(Tape& t, const Var& x) {
  return unary(
      t, x, [](double v) { return std::exp(v); }, [](double, double yv) { return yv; });
}

Var sqrt_op(Tape& t, const Var& x) {
  return unary(
      t, x, [](double v) { return std::sqrt(v); }, [](double, double yv) { return 0.5 / yv; });
}

Var clamp(Tape& t, const Var& x, double lo, double hi) {
  return unary(
      t, x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double xv, double) { return (xv >= lo && xv <= hi) ? 1.0 : 0.0; });
}

Var reshape(Tape& t, const Var& x, std::vector<long> shape) {
  if (shape_numel(shape) != x->val().size()) {
    throw ArgumentError("reshape: element count mismatch " + Tensor::shape_str(x->val().shape()) + " -> " +
                        Tensor::shape_str(shape));
  }
  Tensor out(std::move(shape), x->val().to_vector());
  return t.make(std::move(out), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

Var concat_channels(Tape& t, const Var& a, const Var& b) {
  const Tensor& av = a->val();
  const Tensor& bv = b->val();
  if (av.ndim() != 3 || bv.ndim() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2)) {
    throw ArgumentError("concat_channels: incompatible shapes " + Tensor::shape_str(av.shape()) + " and " +
                        Tensor::shape_str(bv.shape()));
  }
  Tensor out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
  std::copy(av.data(), av.data() + av.size(), out.data());
  std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  return t.make(std::move(out), {a, b}, [a, b](Node& n) {
    const long na = a->val().size();
    if (a->requires_grad) {
      Tensor& g = a->grad_acc();
      for (long i = 0; i < na; ++i) g[i] += n.grad[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[na + i];
    }
  });
}

Var concat_vec(Tape& t, const Var& a, const Var& b) {
  const Tensor& av = a->val();
  const Tensor& bv = b->val();
  if (av.ndim() != 1 || bv.ndim() != 1) throw ArgumentError("concat_vec: expects rank-1 tensors");
  Tensor out({av.size() + bv.size()});
  std::copy(av.data(), av.data() + av.size(), out.data());
  std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  return t.make(std::move(out), {a, b}, [a, b](Node& n) {
    const long na = a->val().size();
    if (a->requires_grad) {
      Tensor& g = a->grad_acc();
      for (long i = 0; i < na; ++i) g[i] += n.grad[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[na + i];
    }
  });
}

Var mul_spatial(Tape& t, const Var& x, const Var& m) {
  const Tensor& xv = x->val();
  const Tensor& mv = m->val();
  const long c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  if (mv.size() != hw) {
    throw ArgumentError("mul_spatial: map size " + std::to_string(mv.size()) + " != h*w " + std::to_string(hw));
  }
  Tensor out(xv.shape());
  for (long ch = 0; ch < c; ++ch)
    for (long p = 0; p < hw; ++p) out[ch * hw + p] = xv[ch * hw + p] * mv[p];
  return t.make(std::move(out), {x, m}, [x, m, c, hw](Node& n) {
    if (x->requires_grad) {
      Tensor& g = x->grad_acc();
      for (long ch = 0; ch < c; ++ch)
        for (long p = 0; p < hw; ++p) g[ch * hw + p] += n.grad[ch * hw + p] * m->val()[p];
    }
    if (m->requires_grad) {
      Tensor& g = m->grad_acc();
      for (long ch = 0; ch < c; ++ch)
        for (long p = 0; p < hw; ++p) g[p] += n.grad[ch * hw + p] * x->val()[ch * hw + p];
    }
  });
}

Var mul_channel(Tape& t, const Var& x, const Var& v) {
  const Tensor& xv = x->val();
  const Tensor& vv = v->val();
  const long c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  if (vv.size() != c) {
    throw ArgumentError("mul_channel: vector size " + std::to_string(vv.size()) + " != channels " + std::to_string(c));
  }
  Tensor out(xv.shape());
  for (long ch = 0; ch < c; ++ch)
    for (long p = 0; p < hw; ++p) out[ch * hw + p] = xv[ch * hw + p] * vv[ch];
  return t.make(std::move(out), {x, v}, [x, v, c, hw](Node& n) {
    if (x->requires_grad) {
      Tensor& g = x->grad_acc();
      for (long ch = 0; ch < c; ++ch)
        for (long p = 0; p < hw; ++p) g[ch * hw + p] += n.grad[ch * hw + p] * v->val()[ch];
    }
    if (v->requires_grad) {
      Tensor& g = v->grad_acc();
      for (long ch = 0; ch < c; ++ch)
        for (long p = 0; p < hw; ++p) g[ch] += n.grad[ch * hw + p] * x->val()[ch * hw + p];
    }
  });
}

Var sum_all(Tape& t, const Var& x) {
  double s = 0;
  for (long i = 0; i < x->val().size(); ++i) s += x->val()[i];
  return t.make(Tensor::scalar(s), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long i = 0; i < g.size(); ++i) g[i] += n.grad[0];
  });
}

Var mean_all(Tape& t, const Var& x) { return scale(t, sum_all(t, x), 1.0 / static_cast<double>(x->val().size())); }

Var dot(Tape& t, const Var& u, const Var& v) {
  check_same_shape(u, v, "dot");
  double s = 0;
  for (long i = 0; i < u->val().size(); ++i) s += u->val()[i] * v->val()[i];
  return t.make(Tensor::scalar(s), {u, v}, [u, v](Node& n) {
    if (u->requires_grad) {
      Tensor& g = u->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[0] * v->val()[i];
    }
    if (v->requires_grad) {
      Tensor& g = v->grad_acc();
      for (long i = 0; i < g.size(); ++i) g[i] += n.grad[0] * u->val()[i];
    }
  });
}

Var global_avg_pool(Tape& t, const Var& x) {
  const Tensor& xv = x->val();
  const long c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  Tensor out({c});
  for (long ch = 0; ch < c; ++ch) {
    double s = 0;
    for (long p = 0; p < hw; ++p) s += xv[ch * hw + p];
    out[ch] = s / static_cast<double>(hw);
  }
  return t.make(std::move(out), {x}, [x, c, hw](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    const double inv = 1.0 / static_cast<double>(hw);
    for (long ch = 0; ch < c; ++ch)
      for (long p = 0; p < hw; ++p) g[ch * hw + p] += n.grad[ch] * inv;
  });
}

Var channel_sum_map(Tape& t, const Var& x) {
  const Tensor& xv = x->val();
  const long c = xv.dim(0), h = xv.dim(1), w = xv.dim(2), hw = h * w;
  Tensor out({1, h, w});
  for (long ch = 0; ch < c; ++ch)
    for (long p = 0; p < hw; ++p) out[p] += xv[ch * hw + p];
  return t.make(std::move(out), {x}, [x, c, hw](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long ch = 0; ch < c; ++ch)
      for (long p = 0; p < hw; ++p) g[ch * hw + p] += n.grad[p];
  });
}

Var channel_mean_map(Tape& t, const Var& x) {
  return scale(t, channel_sum_map(t, x), 1.0 / static_cast<double>(x->val().dim(0)));
}

Var channel_max_map(Tape& t, const Var& x) {
  const Tensor& xv = x->val();
  const long c = xv.dim(0), h = xv.dim(1), w = xv.dim(2), hw = h * w;
  Tensor out({1, h, w});
  auto argmax = std::make_shared<std::vector<long>>(static_cast<size_t>(hw));
  for (long p = 0; p < hw; ++p) {
    long best = 0;
    double bv = xv[p];
    for (long ch = 1; ch < c; ++ch) {
      if (xv[ch * hw + p] > bv) {
        bv = xv[ch * hw + p];
        best = ch;
      }
    }
    out[p] = bv;
    (*argmax)[static_cast<size_t>(p)] = best;
  }
  return t.make(std::move(out), {x}, [x, argmax, hw](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long p = 0; p < hw; ++p) g[(*argmax)[static_cast<size_t>(p)] * hw + p] += n.grad[p];
  });
}

Var softmax_flat(Tape& t, const Var& x) {
  const Tensor& xv = x->val();
  Tensor out(xv.shape());
  double mx = xv[0];
  for (long i = 1; i < xv.size(); ++i) mx = std::max(mx, xv[i]);
  double z = 0;
  for (long i = 0; i < xv.size(); ++i) {
    out[i] = std::exp(xv[i] - mx);
    z += out[i];
  }
  for (long i = 0; i < xv.size(); ++i) out[i] /= z;
  return t.make(std::move(out), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    const Tensor& y = n.value;
    double inner = 0;
    for (long i = 0; i < y.size(); ++i) inner += n.grad[i] * y[i];
    for (long i = 0; i < y.size(); ++i) g[i] += y[i] * (n.grad[i] - inner);
  });
}

Var linear(Tape& t, const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x->val();
  const Tensor& wv = w->val();
  if (wv.ndim() != 2 || xv.size() != wv.dim(1)) {
    throw ArgumentError("linear: weight " + Tensor::shape_str(wv.shape()) + " incompatible with input of size " +
                        std::to_string(xv.size()));
  }
  const long out_dim = wv.dim(0), in_dim = wv.dim(1);
  if (b && b->val().size() != out_dim) throw ArgumentError("linear: bias size mismatch");
  Tensor out({out_dim});
  gemm_nn(wv.data(), xv.data(), out.data(), out_dim, in_dim, 1, false);
  if (b) {
    for (long i = 0; i < out_dim; ++i) out[i] += b->val()[i];
  }
  std::vector<Var> parents = {x, w};
  if (b) parents.push_back(b);
  return t.make(std::move(out), std::move(parents), [x, w, b, out_dim, in_dim](Node& n) {
    if (x->requires_grad) gemm_tn(w->val().data(), n.grad.data(), x->grad_acc().data(), in_dim, out_dim, 1, true);
    if (w->requires_grad) gemm_nt(n.grad.data(), x->val().data(), w->grad_acc().data(), out_dim, 1, in_dim, true);
    if (b && b->requires_grad) {
      Tensor& g = b->grad_acc();
      for (long i = 0; i < out_dim; ++i) g[i] += n.grad[i];
    }
  });
}

namespace {

struct ConvDims {
  long cin, h, w, cout, kh, kw, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, long stride, long pad) {
  if (x.ndim() != 3 || w.ndim() != 4) throw ArgumentError("conv2d: expects x [c,h,w], w [cout,cin,kh,kw]");
  ConvDims d;
  d.cin = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.cout = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  if (w.dim(1) != d.cin) {
    throw ArgumentError("conv2d: input channels " + std::to_string(d.cin) + " != weight channels " +
                        std::to_string(w.dim(1)));
  }
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.ho <= 0 || d.wo <= 0) throw ArgumentError("conv2d: kernel larger than padded input");
  return d;
}

Tensor im2col(const Tensor& x, const ConvDims& d, long stride, long pad) {
  Tensor col({d.cin * d.kh * d.kw, d.ho * d.wo});
  double* cp = col.data();
  for (long ci = 0; ci < d.cin; ++ci) {
    for (long i = 0; i < d.kh; ++i) {
      for (long j = 0; j < d.kw; ++j) {
        for (long oy = 0; oy < d.ho; ++oy) {
          const long iy = oy * stride - pad + i;
          const bool row_ok = iy >= 0 && iy < d.h;
          for (long ox = 0; ox < d.wo; ++ox) {
            const long ix = ox * stride - pad + j;
            *cp++ = (row_ok && ix >= 0 && ix < d.w) ? x.at(ci, iy, ix) : 0.0;
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const Tensor& col, Tensor& gx, const ConvDims& d, long stride, long pad) {
  const double* cp = col.data();
  for (long ci = 0; ci < d.cin; ++ci) {
    for (long i = 0; i < d.kh; ++i) {
      for (long j = 0; j < d.kw; ++j) {
        for (long oy = 0; oy < d.ho; ++oy) {
          const long iy = oy * stride - pad + i;
          const bool row_ok = iy >= 0 && iy < d.h;
          for (long ox = 0; ox < d.wo; ++ox, ++cp) {
            const long ix = ox * stride - pad + j;
            if (row_ok && ix >= 0 && ix < d.w) gx.at(ci, iy, ix) += *cp;
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Tape& t, const Var& x, const Var& w, const Var& b, long stride, long pad) {
  const Tensor& xv = x->val();
  const Tensor& wv = w->val();
  const ConvDims d = conv_dims(xv, wv, stride, pad);
  if (b && b->val().size() != d.cout) throw ArgumentError("conv2d: bias size mismatch");

  const bool pointwise = (d.kh == 1 && d.kw == 1 && stride == 1 && pad == 0);
  const long patch = d.cin * d.kh * d.kw;
  const long npos = d.ho * d.wo;

  // Column matrix cached for the backward pass; for 1x1/s1/p0 the input itself
  // is the column matrix.
  auto col = std::make_shared<Tensor>();
  if (!pointwise) *col = im2col(xv, d, stride, pad);

  Tensor out({d.cout, d.ho, d.wo});
  gemm_nn(wv.data(), pointwise ? xv.data() : col->data(), out.data(), d.cout, patch, npos, false);
  if (b) {
    for (long co = 0; co < d.cout; ++co) {
      const double bias = b->val()[co];
      for (long p = 0; p < npos; ++p) out[co * npos + p] += bias;
    }
  }

  std::vector<Var> parents = {x, w};
  if (b) parents.push_back(b);
  return t.make(std::move(out), std::move(parents), [x, w, b, col, d, stride, pad, pointwise, patch, npos](Node& n) {
    if (w->requires_grad) {
      gemm_nt(n.grad.data(), pointwise ? x->val().data() : col->data(), w->grad_acc().data(), d.cout, npos, patch,
              true);
    }
    if (b && b->requires_grad) {
      Tensor& g = b->grad_acc();
      for (long co = 0; co < d.cout; ++co) {
        double s = 0;
        for (long p = 0; p < npos; ++p) s += n.grad[co * npos + p];
        g[co] += s;
      }
    }
    if (x->requires_grad) {
      if (pointwise) {
        gemm_tn(w->val().data(), n.grad.data(), x->grad_acc().data(), patch, d.cout, npos, true);
      } else {
        Tensor dcol({patch, npos});
        gemm_tn(w->val().data(), n.grad.data(), dcol.data(), patch, d.cout, npos, false);
        col2im_add(dcol, x->grad_acc(), d, stride, pad);
      }
    }
  });
}

Var avg_pool2d(Tape& t, const Var& x, long k, long stride) {
  const Tensor& xv = x->val();
  const long c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const long ho = (h - k) / stride + 1, wo = (w - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ArgumentError("avg_pool2d: window larger than input");
  Tensor out({c, ho, wo});
  const double inv = 1.0 / static_cast<double>(k * k);
  for (long ch = 0; ch < c; ++ch)
    for (long oy = 0; oy < ho; ++oy)
      for (long ox = 0; ox < wo; ++ox) {
        double s = 0;
        for (long i = 0; i < k; ++i)
          for (long j = 0; j < k; ++j) s += xv.at(ch, oy * stride + i, ox * stride + j);
        out.at(ch, oy, ox) = s * inv;
      }
  return t.make(std::move(out), {x}, [x, k, stride, c, ho, wo, inv](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long ch = 0; ch < c; ++ch)
      for (long oy = 0; oy < ho; ++oy)
        for (long ox = 0; ox < wo; ++ox) {
          const double gv = n.grad[(ch * ho + oy) * wo + ox] * inv;
          for (long i = 0; i < k; ++i)
            for (long j = 0; j < k; ++j) g.at(ch, oy * stride + i, ox * stride + j) += gv;
        }
  });
}

Var max_pool2d(Tape& t, const Var& x, long k, long stride, long pad) {
  const Tensor& xv = x->val();
  const long c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const long ho = (h + 2 * pad - k) / stride + 1, wo = (w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ArgumentError("max_pool2d: window larger than padded input");
  Tensor out({c, ho, wo});
  auto argmax = std::make_shared<std::vector<long>>(static_cast<size_t>(c * ho * wo));
  for (long ch = 0; ch < c; ++ch)
    for (long oy = 0; oy < ho; ++oy)
      for (long ox = 0; ox < wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        long best_idx = -1;
        for (long i = 0; i < k; ++i) {
          const long iy = oy * stride - pad + i;
          if (iy < 0 || iy >= h) continue;
          for (long j = 0; j < k; ++j) {
            const long ix = ox * stride - pad + j;
            if (ix < 0 || ix >= w) continue;
            const double v = xv.at(ch, iy, ix);
            if (v > best) {
              best = v;
              best_idx = (ch * h + iy) * w + ix;
            }
          }
        }
        out.at(ch, oy, ox) = best;
        (*argmax)[static_cast<size_t>((ch * ho + oy) * wo + ox)] = best_idx;
      }
  return t.make(std::move(out), {x}, [x, argmax](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    for (long i = 0; i < n.grad.size(); ++i) {
      const long src = (*argmax)[static_cast<size_t>(i)];
      if (src >= 0) g[src] += n.grad[i];
    }
  });
}

Var bn_frozen(Tape& t, const Var& x, const Var& gamma, const Var& beta, const Tensor& mean, const Tensor& var,
              double eps) {
  const Tensor& xv = x->val();
  const long c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  if (gamma->val().size() != c || beta->val().size() != c || mean.size() != c || var.size() != c) {
    throw ArgumentError("bn_frozen: per-channel parameter size mismatch");
  }
  auto inv_std = std::make_shared<Tensor>(Tensor({c}));
  for (long ch = 0; ch < c; ++ch) (*inv_std)[ch] = 1.0 / std::sqrt(var[ch] + eps);
  Tensor out(xv.shape());
  for (long ch = 0; ch < c; ++ch) {
    const double a = gamma->val()[ch] * (*inv_std)[ch];
    const double b = beta->val()[ch] - mean[ch] * a;
    for (long p = 0; p < hw; ++p) out[ch * hw + p] = xv[ch * hw + p] * a + b;
  }
  auto mean_copy = std::make_shared<Tensor>(mean);
  return t.make(std::move(out), {x, gamma, beta}, [x, gamma, beta, inv_std, mean_copy, c, hw](Node& n) {
    for (long ch = 0; ch < c; ++ch) {
      const double is = (*inv_std)[ch];
      if (x->requires_grad) {
        Tensor& g = x->grad_acc();
        const double a = gamma->val()[ch] * is;
        for (long p = 0; p < hw; ++p) g[ch * hw + p] += n.grad[ch * hw + p] * a;
      }
      if (gamma->requires_grad) {
        double s = 0;
        for (long p = 0; p < hw; ++p) s += n.grad[ch * hw + p] * (x->val()[ch * hw + p] - (*mean_copy)[ch]) * is;
        gamma->grad_acc()[ch] += s;
      }
      if (beta->requires_grad) {
        double s = 0;
        for (long p = 0; p < hw; ++p) s += n.grad[ch * hw + p];
        beta->grad_acc()[ch] += s;
      }
    }
  });
}

Var bce_with_logits_mean(Tape& t, const Var& x, const Tensor& y, const Tensor& w) {
  const Tensor& xv = x->val();
  const long n_entries = xv.size();
  if (y.size() != n_entries || w.size() != n_entries) {
    throw ArgumentError("bce_with_logits_mean: logits/targets/weights must have equal length (" +
                        std::to_string(n_entries) + ", " + std::to_string(y.size()) + ", " + std::to_string(w.size()) +
                        ")");
  }
  auto softplus = [](double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); };
  double total = 0;
  for (long i = 0; i < n_entries; ++i) total += w[i] * (softplus(-xv[i]) + (1.0 - y[i]) * xv[i]);
  total /= static_cast<double>(n_entries);
  auto yc = std::make_shared<Tensor>(y);
  auto wc = std::make_shared<Tensor>(w);
  return t.make(Tensor::scalar(total), {x}, [x, yc, wc, n_entries](Node& n) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_acc();
    const double inv = n.grad[0] / static_cast<double>(n_entries);
    for (long i = 0; i < n_entries; ++i) {
      const double xi = x->val()[i];
      const double sig = xi >= 0 ? 1.0 / (1.0 + std::exp(-xi)) : std::exp(xi) / (1.0 + std::exp(xi));
      g[i] += inv * (*wc)[i] * (sig - (*yc)[i]);
    }
  });
}

}  // namespace agman::ops
