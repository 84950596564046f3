#pragma once

#include <vector>

#include "gagrasp/tape.hpp"

namespace gagrasp {

// Registered differentiable primitives. All functions compute the forward
// value, record a backward node on the tape, and return the output slot id.
// Shape mismatches throw std::invalid_argument.

int op_add(Tape& t, int a, int b);
int op_sub(Tape& t, int a, int b);
int op_scale(Tape& t, int a, double s);
int op_mul(Tape& t, int a, int b);  // elementwise

// Channel-wise geometric product of two multivector tensors.
int op_geometric_product(Tape& t, int x, int y);

// Pseudoscalar-scaled join: out[i,c] = zref[i,c]_0123 * join(x[i,c], y[i,c]).
int op_join_scaled(Tape& t, int x, int y, int zref);

// Equivariant linear map. w: [out_ch][in_ch][5], v: [out_ch][in_ch][4],
// flattened as a single scalar tensor of 9 weights per channel pair.
int op_equi_linear(Tape& t, int x, int wv, int in_ch, int out_ch);

// Invariant-inner-product attention over tokens; q: [Tq][C][16],
// k,v: [Tk][C][16]; channels are split across `heads`.
int op_equi_attention(Tape& t, int q, int k, int v, int heads);

int op_gated_gelu(Tape& t, int x);
int op_equi_layernorm(Tape& t, int x, double eps = 1e-8);

// Mean over channels: [T][C][16] -> [T][1][16].
int op_mean_channels(Tape& t, int x);

int op_concat_channels(Tape& t, int a, int b);

// Token gather with per-channel source indices (down-sampling selection).
// idx has out_tokens*channels entries; indices are constants of the backward
// pass and must reference valid source tokens.
int op_select_tokens(Tape& t, int x, const std::vector<int>& idx, int out_tokens);

// Adds s (a [1][C][1] scalar tensor) into the scalar blade component of the
// given token of multivector tensor x.
int op_inject_scalar(Tape& t, int x, int s, int token);

// Dense scalar layer applied per token: out = x W^T + b.
// W: [out_w][in_w] flattened, b: [out_w].
int op_dense(Tape& t, int x, int W, int b, int in_w, int out_w);

int op_gelu(Tape& t, int x);  // elementwise on a scalar tensor

// Reads 3 direction coordinates from each listed (token, channel) of a
// multivector tensor into a [1][3*n][1] scalar tensor.
int op_read_directions(Tape& t, int x, int token, const std::vector<int>& channels);

int op_sum(Tape& t, int x);                               // -> [1][1][1]
int op_mse(Tape& t, int x, std::span<const double> ref);  // mean squared error vs constant

double gelu(double x);
double gelu_grad(double x);

// Central-difference gradient checker. f must be re-evaluable; returns the
// worst relative error over coordinates, comparing analytic to
// (f(x+h)-f(x-h))/2h with denominator max(|analytic|,|numeric|,atol_floor).
double grad_check(const std::function<double(std::span<const double>, std::span<double>)>& f_with_grad,
                  std::span<const double> x, double step, double atol_floor = 1e-6);

}  // namespace gagrasp
