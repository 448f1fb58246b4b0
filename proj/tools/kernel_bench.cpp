// Timing comparison of the solver paths on a common workload: the serial
// dense reference, the production solver single-threaded, and the production
// solver with OpenMP threads. Also times a multi-repetition experiment in
// both execution modes and reports agreement between all paths.

#include <chrono>
#include <cmath>
#include <cstdio>

#include "bsde/bench.hpp"
#include "bsde/reference.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

} // namespace

int main() {
    using namespace bsde;

    std::printf("threads available: %d\n\n", hardware_threads());

    // Single backward solve, hypercube basis.
    {
        const std::size_t n_paths = 8192;
        auto spec = preset("table1", 1);
        auto run = prepare_repetition(spec, n_paths, 0);
        const auto driver = driver_fn(run.driver);
        const auto payoff = payoff_fn(run.payoff);

        std::printf("single solve: M = %zu, N = %zu, hypercube basis\n", n_paths,
            spec.n_steps);

        auto t0 = clock_type::now();
        const auto ref = reference_backward_solve(run.config, run.ensemble, run.basis,
            driver, payoff);
        const double t_ref = seconds_since(t0);

        run.config.mode = ExecMode::Serial;
        t0 = clock_type::now();
        const auto serial = backward_solve(run.config, run.ensemble, run.basis, driver, payoff);
        const double t_serial = seconds_since(t0);

        run.config.mode = ExecMode::Parallel;
        t0 = clock_type::now();
        const auto parallel =
            backward_solve(run.config, run.ensemble, run.basis, driver, payoff);
        const double t_parallel = seconds_since(t0);

        std::printf("  dense reference (serial)   %9.4f s   y0 = %.8f\n", t_ref, ref.y0);
        std::printf("  cell fast path  (serial)   %9.4f s   y0 = %.8f\n", t_serial, serial.y0);
        std::printf("  cell fast path  (OpenMP)   %9.4f s   y0 = %.8f\n", t_parallel,
            parallel.y0);
        std::printf("  |fast - reference| = %.3e, |omp - serial| = %.3e\n\n",
            std::abs(serial.y0 - ref.y0), std::abs(parallel.y0 - serial.y0));
    }

    // Repeated experiment, serial vs parallel repetitions.
    {
        auto spec = preset("table1", 1);
        spec.m_grid = {4096};
        spec.repetitions = 24;

        std::printf("experiment: M = 4096, %zu repetitions\n", spec.repetitions);

        spec.mode = ExecMode::Serial;
        auto t0 = clock_type::now();
        const auto rs = run_experiment(spec);
        const double t_serial = seconds_since(t0);

        spec.mode = ExecMode::Parallel;
        t0 = clock_type::now();
        const auto rp = run_experiment(spec);
        const double t_parallel = seconds_since(t0);

        double max_diff = 0.0;
        for (std::size_t i = 0; i < rs.entries[0].values.size(); ++i) {
            max_diff = std::max(max_diff,
                std::abs(rs.entries[0].values[i] - rp.entries[0].values[i]));
        }
        std::printf("  serial  %9.4f s   mean = %.6f\n", t_serial, rs.entries[0].mean);
        std::printf("  OpenMP  %9.4f s   mean = %.6f   speedup x%.2f\n", t_parallel,
            rp.entries[0].mean, t_serial / t_parallel);
        std::printf("  max |serial - OpenMP| over repetitions = %.3e\n", max_diff);
    }
    return 0;
}
