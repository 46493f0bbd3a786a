// Copyright 2026 The prioctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts, sized like the
// study's regressions (30 s at 1 kHz, 4 joints).

#include "prioctl/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace prioctl;

namespace {

struct Problem {
  MatrixXd phi;
  VectorXd w;
  MatrixXd u;
};

Problem make_problem(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Problem p{MatrixXd(rows, cols), VectorXd(rows), MatrixXd(rows, 4)};
  for (Eigen::Index i = 0; i < p.phi.size(); ++i) p.phi.data()[i] = nd(rng);
  for (Eigen::Index i = 0; i < p.u.size(); ++i) p.u.data()[i] = nd(rng);
  for (Eigen::Index i = 0; i < rows; ++i) p.w(i) = std::abs(nd(rng));
  return p;
}

template <bool Parallel>
void normal_equations(benchmark::State& state) {
  const auto p = make_problem(state.range(0), 11);
  for (auto _ : state) {
    auto ne = Parallel ? kernels::parallel::weighted_normal_equations(p.phi, p.w, p.u)
                       : kernels::serial::weighted_normal_equations(p.phi, p.w, p.u);
    benchmark::DoNotOptimize(ne.gram.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void linear_kernel(benchmark::State& state) {
  const auto p = make_problem(state.range(0), 11);
  for (auto _ : state) {
    auto k = Parallel ? kernels::parallel::linear_kernel(p.phi) : kernels::serial::linear_kernel(p.phi);
    benchmark::DoNotOptimize(k.data());
  }
}

template <bool Parallel>
void column_rms(benchmark::State& state) {
  const auto p = make_problem(state.range(0), 11);
  for (auto _ : state) {
    auto r = Parallel ? kernels::parallel::column_rms(p.phi) : kernels::serial::column_rms(p.phi);
    benchmark::DoNotOptimize(r.data());
  }
}

}  // namespace

BENCHMARK(normal_equations<false>)->Name("normal_equations/serial")->Arg(3000)->Arg(30000)->Arg(90000);
BENCHMARK(normal_equations<true>)->Name("normal_equations/openmp")->Arg(3000)->Arg(30000)->Arg(90000);
BENCHMARK(linear_kernel<false>)->Name("linear_kernel/serial")->Arg(500)->Arg(2000);
BENCHMARK(linear_kernel<true>)->Name("linear_kernel/openmp")->Arg(500)->Arg(2000);
BENCHMARK(column_rms<false>)->Name("column_rms/serial")->Arg(30000)->Arg(90000);
BENCHMARK(column_rms<true>)->Name("column_rms/openmp")->Arg(30000)->Arg(90000);

BENCHMARK_MAIN();
