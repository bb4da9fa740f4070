// OpenMP kernels for the dense sensing operator and for independent trials.
// Each parallel kernel has a serial reference with the same per-entry
// summation order, so results do not depend on the thread count.

#pragma once

#include <functional>

#include "lowrank/matcore.hpp"

namespace lowrank::kernels {

// a is row-major p x d: row i holds vec(A_i). out[i] = <a_i, x>.
void sensing_apply_serial(const double* a, Index p, Index d, const double* x,
                          double* out);
void sensing_apply_parallel(const double* a, Index p, Index d, const double* x,
                            double* out);

// out[j] = sum_i v[i] * a(i, j), accumulated in increasing i.
void sensing_adjoint_serial(const double* a, Index p, Index d, const double* v,
                            double* out);
void sensing_adjoint_parallel(const double* a, Index p, Index d,
                              const double* v, double* out);

// Runs body(i) for i in [0, n) on the worker pool. body must only write state
// owned by index i. The first exception thrown (lowest index) is rethrown.
void parallel_for(Index n, const std::function<void(Index)>& body);
void serial_for(Index n, const std::function<void(Index)>& body);

int worker_threads();
void set_worker_threads(int n);

// Reads LOWRANK_THREADS; returns 0 when unset or invalid.
int threads_from_env();

}  // namespace lowrank::kernels
