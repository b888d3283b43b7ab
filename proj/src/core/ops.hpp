#pragma once

#include "core/autograd.hpp"

namespace agman::ops {

// Elementwise / scalar
Var add(Tape& t, const Var& a, const Var& b);
Var sub(Tape& t, const Var& a, const Var& b);
Var mul(Tape& t, const Var& a, const Var& b);
Var div(Tape& t, const Var& a, const Var& b);
Var scale(Tape& t, const Var& x, double s);
Var add_const(Tape& t, const Var& x, double c);
Var relu(Tape& t, const Var& x);
Var tanh_op(Tape& t, const Var& x);
Var sigmoid(Tape& t, const Var& x);
Var exp_op(Tape& t, const Var& x);
Var sqrt_op(Tape& t, const Var& x);
Var clamp(Tape& t, const Var& x, double lo, double hi);

// Shape / combination
Var reshape(Tape& t, const Var& x, std::vector<long> shape);
Var concat_channels(Tape& t, const Var& a, const Var& b);  // [c1,h,w] + [c2,h,w]
Var concat_vec(Tape& t, const Var& a, const Var& b);       // [m] + [k]

// Broadcast products on feature maps
Var mul_spatial(Tape& t, const Var& x, const Var& m);  // x [c,h,w], m [h,w] or [1,h,w]
Var mul_channel(Tape& t, const Var& x, const Var& v);  // x [c,h,w], v [c]

// Reductions
Var sum_all(Tape& t, const Var& x);   // -> [1]
Var mean_all(Tape& t, const Var& x);  // -> [1]
Var dot(Tape& t, const Var& u, const Var& v);
Var global_avg_pool(Tape& t, const Var& x);   // [c,h,w] -> [c]
Var channel_sum_map(Tape& t, const Var& x);   // [c,h,w] -> [1,h,w]
Var channel_mean_map(Tape& t, const Var& x);  // [c,h,w] -> [1,h,w]
Var channel_max_map(Tape& t, const Var& x);   // [c,h,w] -> [1,h,w]

// Softmax over all entries (stable); shape preserved.
Var softmax_flat(Tape& t, const Var& x);

// Dense layers. x is a vector [in]; w is [out,in]; bias optional (empty Var()).
Var linear(Tape& t, const Var& x, const Var& w, const Var& b = nullptr);

// 2-D convolution on [cin,h,w] with weight [cout,cin,kh,kw], optional bias [cout].
Var conv2d(Tape& t, const Var& x, const Var& w, const Var& b, long stride, long pad);

Var avg_pool2d(Tape& t, const Var& x, long k, long stride);
Var max_pool2d(Tape& t, const Var& x, long k, long stride, long pad);

// Frozen batch norm: y = (x - mean)/sqrt(var+eps) * gamma + beta, with mean/var
// treated as constants (running statistics).
Var bn_frozen(Tape& t, const Var& x, const Var& gamma, const Var& beta, const Tensor& mean, const Tensor& var,
              double eps = 1e-5);

// Mean over entries of -w[y*log(sigmoid(x)) + (1-y)*log(1-sigmoid(x))], stable.
Var bce_with_logits_mean(Tape& t, const Var& x, const Tensor& y, const Tensor& w);

// Raw GEMM helpers (Eigen-backed). C (+)= op(A)*op(B).
void gemm_nn(const double* a, const double* b, double* c, long m, long k, long n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, long m, long k, long n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, long m, long k, long n, bool accumulate);

}  // namespace agman::ops
