// Micro-benchmark for the dense kernels and the two encoder
// implementations. Every parallel kernel is checked bitwise against its
// serial twin on the benched shapes before timing, so the numbers always
// describe two implementations of the same arithmetic.
//
// Usage: apt_bench [reps]   (reps scales every measurement loop; default 9)

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "apt/gating.hpp"
#include "apt/kernels.hpp"
#include "apt/model.hpp"
#include "apt/reference_encoder.hpp"
#include "apt/rng.hpp"
#include "apt/tape.hpp"

using namespace apt;

namespace {

int g_reps = 9;

double median_usec(const std::function<void()>& body) {
  body();  // warm up
  std::vector<double> times;
  for (int r = 0; r < g_reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

std::vector<float> random_vec(size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.next_normal());
  return v;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

void report(const char* kernel, const std::string& shape, double serial_us,
            double par_us) {
  std::printf("%-16s %-14s %10.1f %10.1f %8.2fx\n", kernel, shape.c_str(), serial_us,
              par_us, serial_us / par_us);
}

void bench_matmul(int64_t m, int64_t k, int64_t n, Rng& rng) {
  const auto a = random_vec(size_t(m * k), rng);
  const auto b = random_vec(size_t(k * n), rng);
  std::vector<float> cs(size_t(m * n)), cp(size_t(m * n));
  kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n);
  kernels::par::matmul(a.data(), b.data(), cp.data(), m, k, n);
  if (!bits_equal(cs, cp)) {
    std::fprintf(stderr, "matmul: parallel result is not bitwise serial\n");
    std::exit(1);
  }
  const double su = median_usec(
      [&] { kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n); });
  const double pu =
      median_usec([&] { kernels::par::matmul(a.data(), b.data(), cp.data(), m, k, n); });
  report("matmul", std::to_string(m) + "x" + std::to_string(k) + "x" + std::to_string(n),
         su, pu);
}

void bench_acc_nt(int64_t m, int64_t k, int64_t n, Rng& rng) {
  const auto a = random_vec(size_t(m * k), rng);
  const auto b = random_vec(size_t(n * k), rng);
  std::vector<float> cs(size_t(m * n), 0.f), cp(size_t(m * n), 0.f);
  kernels::serial::acc_matmul_nt(a.data(), b.data(), cs.data(), m, k, n);
  kernels::par::acc_matmul_nt(a.data(), b.data(), cp.data(), m, k, n);
  if (!bits_equal(cs, cp)) {
    std::fprintf(stderr, "acc_matmul_nt: parallel result is not bitwise serial\n");
    std::exit(1);
  }
  const double su = median_usec(
      [&] { kernels::serial::acc_matmul_nt(a.data(), b.data(), cs.data(), m, k, n); });
  const double pu = median_usec(
      [&] { kernels::par::acc_matmul_nt(a.data(), b.data(), cp.data(), m, k, n); });
  report("acc_matmul_nt",
         std::to_string(m) + "x" + std::to_string(k) + "x" + std::to_string(n), su, pu);
}

void bench_softmax(int64_t m, int64_t n, Rng& rng) {
  const auto x = random_vec(size_t(m * n), rng);
  std::vector<float> ys(size_t(m * n)), yp(size_t(m * n));
  kernels::serial::softmax_rows(x.data(), ys.data(), m, n);
  kernels::par::softmax_rows(x.data(), yp.data(), m, n);
  if (!bits_equal(ys, yp)) {
    std::fprintf(stderr, "softmax_rows: parallel result is not bitwise serial\n");
    std::exit(1);
  }
  const double su =
      median_usec([&] { kernels::serial::softmax_rows(x.data(), ys.data(), m, n); });
  const double pu =
      median_usec([&] { kernels::par::softmax_rows(x.data(), yp.data(), m, n); });
  report("softmax_rows", std::to_string(m) + "x" + std::to_string(n), su, pu);
}

void bench_layer_norm(int64_t m, int64_t n, Rng& rng) {
  const auto x = random_vec(size_t(m * n), rng);
  const std::vector<float> gain(size_t(n), 1.f), bias(size_t(n), 0.f);
  std::vector<float> ys(size_t(m * n)), yp(size_t(m * n));
  std::vector<float> mu(static_cast<size_t>(m)), inv(static_cast<size_t>(m));
  kernels::serial::layer_norm_rows(x.data(), gain.data(), bias.data(), ys.data(),
                                   mu.data(), inv.data(), m, n, 1e-5f);
  kernels::par::layer_norm_rows(x.data(), gain.data(), bias.data(), yp.data(), mu.data(),
                                inv.data(), m, n, 1e-5f);
  if (!bits_equal(ys, yp)) {
    std::fprintf(stderr, "layer_norm_rows: parallel result is not bitwise serial\n");
    std::exit(1);
  }
  const double su = median_usec([&] {
    kernels::serial::layer_norm_rows(x.data(), gain.data(), bias.data(), ys.data(),
                                     mu.data(), inv.data(), m, n, 1e-5f);
  });
  const double pu = median_usec([&] {
    kernels::par::layer_norm_rows(x.data(), gain.data(), bias.data(), yp.data(),
                                  mu.data(), inv.data(), m, n, 1e-5f);
  });
  report("layer_norm_rows", std::to_string(m) + "x" + std::to_string(n), su, pu);
}

void bench_map(int64_t count, Rng& rng) {
  const auto x = random_vec(size_t(count), rng);
  std::vector<float> ys(static_cast<size_t>(count)), yp(static_cast<size_t>(count));
  const auto f = [](float v) { return kernels::stable_sigmoid(v); };
  kernels::serial::map(x.data(), ys.data(), count, f);
  kernels::par::map(x.data(), yp.data(), count, f);
  if (!bits_equal(ys, yp)) {
    std::fprintf(stderr, "map: parallel result is not bitwise serial\n");
    std::exit(1);
  }
  const double su = median_usec([&] { kernels::serial::map(x.data(), ys.data(), count, f); });
  const double pu = median_usec([&] { kernels::par::map(x.data(), yp.data(), count, f); });
  report("map(sigmoid)", std::to_string(count), su, pu);
}

// Tape forward over a batch vs. the per-example plain-loop reference used by
// the tests. The reference runs in double precision by design, so this is a
// fidelity-versus-speed comparison, not a same-arithmetic race.
void bench_encoders() {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.num_heads = 4;
  cfg.model_dim = 64;
  cfg.ffn_dim = 128;
  cfg.vocab_size = 50;
  cfg.max_seq_len = 16;
  cfg.prefix_len = 4;
  Backbone<float> bb = init_backbone<float>(cfg, Rng(7));
  GatingModule<float> module(cfg, GateMode::apt, Rng(42));

  Rng rng(9);
  std::vector<std::vector<int>> rows;
  for (int e = 0; e < 8; ++e) {
    std::vector<int> row;
    for (int i = 0; i < 16; ++i) row.push_back(int(rng.next_below(50)));
    rows.push_back(std::move(row));
  }
  const TokenBatch batch = TokenBatch::from_rows(rows, 0);

  const double tape_us = median_usec([&] {
    Tape<float> tape;
    module.attach(tape);
    (void)encode(tape, batch, cfg, bb, &module);
  });
  const double ref_us = median_usec([&] {
    for (const auto& row : rows) (void)ref::encode(cfg, bb, row);
  });
  std::printf("%-16s %-14s %10.1f %10.1f %8.2fx\n", "encoder fwd", "8x16 d=64",
              ref_us, tape_us, ref_us / tape_us);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_reps = std::max(1, std::atoi(argv[1]));
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP: not enabled\n");
#endif
  std::printf("%-16s %-14s %10s %10s %9s\n", "kernel", "shape", "serial us",
              "par us", "speedup");

  Rng rng(1234);
  bench_matmul(24, 24, 24, rng);
  bench_matmul(64, 64, 64, rng);
  bench_matmul(128, 128, 128, rng);
  bench_matmul(256, 256, 256, rng);
  bench_acc_nt(64, 64, 64, rng);
  bench_acc_nt(128, 128, 128, rng);
  bench_softmax(32, 128, rng);
  bench_softmax(256, 256, rng);
  bench_layer_norm(32, 128, rng);
  bench_layer_norm(256, 256, rng);
  bench_map(1 << 15, rng);
  bench_map(1 << 18, rng);

  std::printf("%-16s %-14s %10s %10s %9s\n", "pipeline", "shape", "ref us", "tape us",
              "ratio");
  bench_encoders();
  return 0;
}
