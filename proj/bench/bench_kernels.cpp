// Times the OpenMP kernels against their serial references:
//   deploy        per-user chosen-service losses
//   brute force   partition enumeration over restricted-growth strings
//   experiment    independent seeded trials
// Usage: bench_kernels [--quick]

#include <omp.h>

#include <cstdio>
#include <cstring>

#include "acquire/harness.hpp"
#include "acquire/oracle.hpp"

using namespace acquire;

namespace {

template <typename F>
double time_seconds(F&& fn) {
  const double start = omp_get_wtime();
  fn();
  return omp_get_wtime() - start;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-24s serial %8.3fs   openmp %8.3fs   speedup %5.2fx\n", name, serial, parallel,
              parallel > 0 ? serial / parallel : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  std::printf("threads: %d\n", omp_get_max_threads());

  {
    MixtureSpec spec;
    spec.num_clusters = 4;
    spec.users_per_cluster = quick ? 2000 : 20000;
    spec.d = 8;
    spec.separation = 10.0;
    const Population pop = synthetic_mixture(spec, 7);
    ServiceSet services;
    for (int j = 0; j < 8; ++j) services.add(pop.user(j * 3).preference, -1);

    double sink = 0.0;
    const double serial = time_seconds([&] {
      for (int rep = 0; rep < 20; ++rep) sink += total_loss(pop, services, ExecPolicy::Serial);
    });
    const double parallel = time_seconds([&] {
      for (int rep = 0; rep < 20; ++rep) sink += total_loss(pop, services, ExecPolicy::Parallel);
    });
    report("deploy/total_loss", serial, parallel);
    std::printf("  (checksum %.6g)\n", sink);
  }

  {
    MixtureSpec spec;
    spec.num_clusters = 3;
    spec.users_per_cluster = quick ? 3 : 4;
    spec.d = 3;
    spec.separation = 6.0;
    const Population pop = synthetic_mixture(spec, 11);
    const int k = 3;
    BruteForceOptions serial_opts;
    serial_opts.policy = ExecPolicy::Serial;
    BruteForceOptions parallel_opts;
    parallel_opts.policy = ExecPolicy::Parallel;

    OptimalClustering a, b;
    const double serial = time_seconds([&] { a = brute_force_opt(pop, k, serial_opts); });
    const double parallel = time_seconds([&] { b = brute_force_opt(pop, k, parallel_opts); });
    report("brute_force_opt", serial, parallel);
    std::printf("  (losses %.12g / %.12g)\n", a.total_loss, b.total_loss);
  }

  {
    MixtureSpec spec;
    spec.num_clusters = 2;
    spec.users_per_cluster = 50;
    spec.d = 2;
    spec.separation = 10.0;
    const Population pop = synthetic_mixture(spec, 5);
    ExperimentConfig config;
    config.k = 4;
    config.trials = quick ? 100 : 400;
    config.base_seed = 1;
    config.strategies = {Strategy::parse("acquire"), Strategy::parse("random")};

    MetricsReport a, b;
    const double serial =
        time_seconds([&] { a = run_experiment(config, pop, ExecPolicy::Serial); });
    const double parallel =
        time_seconds([&] { b = run_experiment(config, pop, ExecPolicy::Parallel); });
    report("run_experiment", serial, parallel);
    std::printf("  (mean losses %.12g / %.12g)\n", a.strategies[0].mean_total_loss,
                b.strategies[0].mean_total_loss);
  }

  return 0;
}
