#pragma once

#include <cstddef>
#include <string>

namespace canopi::kernels {

// Data-parallel inner loops shared by the simplex engine and the contingency
// screen. Each kernel has a scalar reference implementation and an AVX2+FMA
// variant; the active one is picked once at startup from CPUID. The two
// variants are equivalence-tested against each other in tests/test_kernels.

// y[i] += a * x[i]
void axpy(double* y, const double* x, double a, std::size_t n);

// y[i] = y[i] * scale - a * x[i]   (fused pivot-row elimination step)
void scale_sub(double* y, double scale, const double* x, double a, std::size_t n);

// out[i] = |p[i] + lam[i] * pj| - cap[i]
// One LODF screening column: post-contingency overload margin of every
// monitored branch i when branch j (pre-outage flow pj) is lost.
void screen_column(double* out, const double* p, const double* lam, double pj,
                   const double* cap, std::size_t n);

// dot product
double dot(const double* x, const double* y, std::size_t n);

enum class Isa { scalar, avx2 };

Isa active_isa();
std::string isa_name();

// Force the scalar path (used by the equivalence tests and the
// CANOPI_FORCE_SCALAR environment variable). Returns the previous setting.
bool force_scalar(bool on);

namespace detail {
void axpy_scalar(double*, const double*, double, std::size_t);
void scale_sub_scalar(double*, double, const double*, double, std::size_t);
void screen_column_scalar(double*, const double*, const double*, double,
                          const double*, std::size_t);
double dot_scalar(const double*, const double*, std::size_t);
#if defined(__x86_64__) || defined(_M_X64)
void axpy_avx2(double*, const double*, double, std::size_t);
void scale_sub_avx2(double*, double, const double*, double, std::size_t);
void screen_column_avx2(double*, const double*, const double*, double,
                        const double*, std::size_t);
double dot_avx2(const double*, const double*, std::size_t);
#endif
}  // namespace detail

}  // namespace canopi::kernels
