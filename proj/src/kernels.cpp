#include "bcrf/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace bcrf::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

} // namespace scalar

namespace {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend pick_initial_backend() {
    if (const char* env = std::getenv("BCRF_KERNELS")) {
        std::string s(env);
        if (s == "scalar") return Backend::scalar;
        if (s == "avx2" && avx2_supported()) return Backend::avx2;
    }
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& backend_state() {
    static Backend b = pick_initial_backend();
    return b;
}

} // namespace

Backend active_backend() { return backend_state(); }

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported())
        throw std::runtime_error("avx2 backend not supported on this CPU");
    backend_state() = b;
}

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend_state() == Backend::avx2) return avx2::dot(a, b, n);
#endif
    return scalar::dot(a, b, n);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend_state() == Backend::avx2) return avx2::squared_distance(a, b, n);
#endif
    return scalar::squared_distance(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend_state() == Backend::avx2) {
        avx2::axpy(alpha, x, y, n);
        return;
    }
#endif
    scalar::axpy(alpha, x, y, n);
}

} // namespace bcrf::kernels
