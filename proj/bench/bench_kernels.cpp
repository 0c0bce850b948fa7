// Serial reference vs OpenMP kernels, plus one forward/backward pass of a member.

#include <benchmark/benchmark.h>

#include <random>

#include "hyperutil/hypernet.hpp"
#include "hyperutil/kernels.hpp"

using namespace hyperutil;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

template <auto Kernel>
void affine(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix a = random_matrix(n, 64, 1), w = random_matrix(64, 64, 2), out(n, 64);
  std::vector<double> bias(64, 0.1);
  for (auto _ : st) {
    Kernel(a, w, bias, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  st.SetItemsProcessed(st.iterations() * n);
}

template <auto Kernel>
void matmul_nt(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix g = random_matrix(n, 64, 3), w = random_matrix(64, 64, 4), out(n, 64);
  for (auto _ : st) {
    Kernel(g, w, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  st.SetItemsProcessed(st.iterations() * n);
}

template <auto Kernel>
void accumulate_tn(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix a = random_matrix(n, 64, 5), g = random_matrix(n, 64, 6), out(64, 64);
  for (auto _ : st) {
    Kernel(a, g, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  st.SetItemsProcessed(st.iterations() * n);
}

void member_step(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  TrainConfig c;
  HyperMember m = make_member(12, c, 7);
  Matrix x = random_matrix(n, 12, 8);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  std::uint64_t seed = 0;
  for (auto _ : st) benchmark::DoNotOptimize(batch_loss(m, x, y, c, true, ++seed).loss);
  st.SetItemsProcessed(st.iterations() * n);
}

}  // namespace

BENCHMARK(affine<kernels::serial::affine>)->Name("affine/serial")->Arg(64)->Arg(1024)->Arg(8192);
BENCHMARK(affine<kernels::parallel::affine>)->Name("affine/parallel")->Arg(64)->Arg(1024)->Arg(8192);
BENCHMARK(matmul_nt<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->Arg(64)->Arg(1024)->Arg(8192);
BENCHMARK(matmul_nt<kernels::parallel::matmul_nt>)->Name("matmul_nt/parallel")->Arg(64)->Arg(1024)->Arg(8192);
BENCHMARK(accumulate_tn<kernels::serial::accumulate_tn>)->Name("accumulate_tn/serial")->Arg(64)->Arg(1024)->Arg(8192);
BENCHMARK(accumulate_tn<kernels::parallel::accumulate_tn>)->Name("accumulate_tn/parallel")->Arg(64)->Arg(1024)->Arg(8192);
BENCHMARK(member_step)->Arg(64)->Arg(1024);

BENCHMARK_MAIN();
