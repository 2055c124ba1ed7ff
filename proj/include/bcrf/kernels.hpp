#pragma once

#include <cstddef>
#include <string>

namespace bcrf::kernels {

// Dense double-precision kernels behind the numeric inner loops (classifier
// scoring and SGD updates, descriptor distances, feature accumulation).
// A scalar reference implementation always exists; an AVX2+FMA variant is
// selected at runtime when the CPU supports it. Set BCRF_KERNELS=scalar in
// the environment to force the reference path.

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name(Backend b);

// Force a backend (throws if unsupported on this CPU). Used by tests.
void force_backend(Backend b);

double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// Reference implementations, exposed for equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
} // namespace avx2
#endif

} // namespace bcrf::kernels
