#pragma once

#include <vector>

#include "rmat/tensor.hpp"

// Raw forward/backward kernels shared by the tape and by tape-free code
// paths (evaluation, solver freeze passes). Backward kernels accumulate
// into the provided gradient tensors; a null destination skips that input.
namespace rmat::ops {

// ---- elementwise ----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a);  // alpha = 1
Tensor tanh(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor clamp(const Tensor& a, double lo, double hi);

// ---- linear algebra -------------------------------------------------------
// x: [c_in,h,w], kernel: [c_out,c_in,kh,kw], bias: [c_out]; cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, int padding);
void conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& gout, int stride,
                     int padding, Tensor* gx, Tensor* gkernel, Tensor* gbias);

// x: [n], w: [m,n], b: [m] -> w x + b
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx, Tensor* gw,
                     Tensor* gb);

// a: [n], m: [n,p], b: [p] -> scalar a' m b
Tensor bilinear(const Tensor& a, const Tensor& m, const Tensor& b);
void bilinear_backward(const Tensor& a, const Tensor& m, const Tensor& b, double gout, Tensor* ga,
                       Tensor* gm, Tensor* gb);

// a: [m,k], b: [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor* ga, Tensor* gb);

// out = x scaled by s along `axis` (s length equals x.dim(axis)).
Tensor axis_scale(const Tensor& x, const Tensor& s, int axis);
void axis_scale_backward(const Tensor& x, const Tensor& s, int axis, const Tensor& gout, Tensor* gx,
                         Tensor* gs);

// a: [m], b: [n] -> [m,n], out[i][j] = a[i] + b[j]
Tensor outer_sum(const Tensor& a, const Tensor& b);
void outer_sum_backward(const Tensor& gout, Tensor* ga, Tensor* gb);

// Column-wise concatenation of [v,d_i] matrices sharing v.
Tensor concat_cols(const std::vector<const Tensor*>& parts);
// Stack [n] vectors into a [v,n] matrix.
Tensor stack_rows(const std::vector<const Tensor*>& rows);

// Adaptive average pooling of [c,h,w] onto a [c,grid,grid] cell average;
// h and w must be divisible by grid.
Tensor avg_pool(const Tensor& x, int grid);
void avg_pool_backward(const Tensor& x, int grid, const Tensor& gout, Tensor* gx);

Tensor reshape(const Tensor& x, std::vector<int> shape);

// ---- reductions -----------------------------------------------------------
Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);
Tensor mean_axis(const Tensor& x, int axis);
void mean_axis_backward(const Tensor& x, int axis, const Tensor& gout, Tensor* gx);
Tensor softmax_axis(const Tensor& x, int axis);
void softmax_axis_backward(const Tensor& y, int axis, const Tensor& gout, Tensor* gx);

// Shape of a conv2d output given the input spatial extent.
int conv_out_extent(int in, int kernel, int stride, int padding);

}  // namespace rmat::ops
