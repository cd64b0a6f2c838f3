#pragma once

#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

// Dense kernels behind the tape ops. Each kernel comes in two flavors:
// a plain serial loop (namespace serial) and an OpenMP version (namespace
// par) that splits work across independent output elements only. Because a
// given output element is always computed by one thread with a fixed inner
// loop order, the parallel results are bitwise identical to the serial ones
// for any thread count; the unit tests assert exactly that.
//
// The unqualified wrappers dispatch to the parallel flavor once the work
// size crosses a grain threshold.

namespace apt::kernels {

inline constexpr int64_t kMatmulGrain = 1 << 15;   // m*n*k
inline constexpr int64_t kRowGrain = 1 << 14;      // m*n for row-wise ops
inline constexpr int64_t kMapGrain = 1 << 16;      // flat elementwise

namespace serial {

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    for (int64_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a * b^T   (a: m x k, b: n x k, c: m x n)
template <typename T>
void acc_matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// c += a^T * b   (a: k x m, b: k x n, c: m x n)
template <typename T>
void acc_matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t m, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* xr = x + i * n;
    T* yr = y + i * n;
    T mx = xr[0];
    for (int64_t j = 1; j < n; ++j) mx = xr[j] > mx ? xr[j] : mx;
    T sum = T(0);
    for (int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const T inv = T(1) / sum;
    for (int64_t j = 0; j < n; ++j) yr[j] *= inv;
  }
}

// y = (x - mean) / sqrt(var + eps) * gain + bias, per row; saves the
// per-row mean and 1/sqrt(var+eps) for the backward pass.
template <typename T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* y,
                     T* mean_out, T* inv_std_out, int64_t m, int64_t n, T eps) {
  for (int64_t i = 0; i < m; ++i) {
    const T* xr = x + i * n;
    T* yr = y + i * n;
    T mu = T(0);
    for (int64_t j = 0; j < n; ++j) mu += xr[j];
    mu /= T(n);
    T var = T(0);
    for (int64_t j = 0; j < n; ++j) {
      const T d = xr[j] - mu;
      var += d * d;
    }
    var /= T(n);
    const T inv = T(1) / std::sqrt(var + eps);
    for (int64_t j = 0; j < n; ++j) yr[j] = (xr[j] - mu) * inv * gain[j] + bias[j];
    mean_out[i] = mu;
    inv_std_out[i] = inv;
  }
}

template <typename T, typename F>
void map(const T* x, T* y, int64_t count, F f) {
  for (int64_t i = 0; i < count; ++i) y[i] = f(x[i]);
}

}  // namespace serial

namespace par {

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    for (int64_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void acc_matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

template <typename T>
void acc_matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t m, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) serial::softmax_rows(x + i * n, y + i * n, 1, n);
}

template <typename T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* y,
                     T* mean_out, T* inv_std_out, int64_t m, int64_t n, T eps) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i)
    serial::layer_norm_rows(x + i * n, gain, bias, y + i * n, mean_out + i,
                            inv_std_out + i, 1, n, eps);
}

template <typename T, typename F>
void map(const T* x, T* y, int64_t count, F f) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i) y[i] = f(x[i]);
}

}  // namespace par

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  if (m * k * n >= kMatmulGrain)
    par::matmul(a, b, c, m, k, n);
  else
    serial::matmul(a, b, c, m, k, n);
}

template <typename T>
void acc_matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  if (m * k * n >= kMatmulGrain)
    par::acc_matmul_nt(a, b, c, m, k, n);
  else
    serial::acc_matmul_nt(a, b, c, m, k, n);
}

template <typename T>
void acc_matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  if (m * k * n >= kMatmulGrain)
    par::acc_matmul_tn(a, b, c, m, k, n);
  else
    serial::acc_matmul_tn(a, b, c, m, k, n);
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t m, int64_t n) {
  if (m * n >= kRowGrain)
    par::softmax_rows(x, y, m, n);
  else
    serial::softmax_rows(x, y, m, n);
}

template <typename T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* y,
                     T* mean_out, T* inv_std_out, int64_t m, int64_t n, T eps) {
  if (m * n >= kRowGrain)
    par::layer_norm_rows(x, gain, bias, y, mean_out, inv_std_out, m, n, eps);
  else
    serial::layer_norm_rows(x, gain, bias, y, mean_out, inv_std_out, m, n, eps);
}

template <typename T, typename F>
void map(const T* x, T* y, int64_t count, F f) {
  if (count >= kMapGrain)
    par::map(x, y, count, f);
  else
    serial::map(x, y, count, f);
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace apt::kernels
