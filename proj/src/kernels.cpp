#include "canopi/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace canopi::kernels {

namespace detail {

void axpy_scalar(double* y, const double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_sub_scalar(double* y, double scale, const double* x, double a,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] * scale - a * x[i];
}

void screen_column_scalar(double* out, const double* p, const double* lam,
                          double pj, const double* cap, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::fabs(p[i] + lam[i] * pj) - cap[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace detail

namespace {

struct Dispatch {
  void (*axpy)(double*, const double*, double, std::size_t);
  void (*scale_sub)(double*, double, const double*, double, std::size_t);
  void (*screen_column)(double*, const double*, const double*, double,
                        const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  Isa isa;
};

constexpr Dispatch kScalar{detail::axpy_scalar, detail::scale_sub_scalar,
                           detail::screen_column_scalar, detail::dot_scalar,
                           Isa::scalar};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Dispatch kAvx2{detail::axpy_avx2, detail::scale_sub_avx2,
                         detail::screen_column_avx2, detail::dot_avx2,
                         Isa::avx2};
#endif

Dispatch pick() {
#if defined(__x86_64__) || defined(_M_X64)
  if (std::getenv("CANOPI_FORCE_SCALAR") != nullptr) return kScalar;
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return kAvx2;
#endif
  return kScalar;
}

std::atomic<const Dispatch*> g_active{nullptr};

const Dispatch& active() {
  const Dispatch* d = g_active.load(std::memory_order_acquire);
  if (d == nullptr) {
    static Dispatch chosen = pick();
    g_active.store(&chosen, std::memory_order_release);
    return chosen;
  }
  return *d;
}

}  // namespace

void axpy(double* y, const double* x, double a, std::size_t n) {
  active().axpy(y, x, a, n);
}
void scale_sub(double* y, double scale, const double* x, double a,
               std::size_t n) {
  active().scale_sub(y, scale, x, a, n);
}
void screen_column(double* out, const double* p, const double* lam, double pj,
                   const double* cap, std::size_t n) {
  active().screen_column(out, p, lam, pj, cap, n);
}
double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}

Isa active_isa() { return active().isa; }

std::string isa_name() {
  return active_isa() == Isa::avx2 ? "avx2" : "scalar";
}

bool force_scalar(bool on) {
  bool was = active_isa() == Isa::scalar;
#if defined(__x86_64__) || defined(_M_X64)
  static Dispatch scalar_copy = kScalar;
  if (on) {
    g_active.store(&scalar_copy, std::memory_order_release);
  } else {
    static Dispatch chosen = pick();
    g_active.store(&chosen, std::memory_order_release);
  }
#else
  (void)on;
#endif
  return was;
}

}  // namespace canopi::kernels
