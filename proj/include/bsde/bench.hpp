#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsde/solver.hpp"

namespace bsde {

struct BasisConfig {
    BasisKind kind = BasisKind::HC;
    // HC; an empty center means "center the box on P_0"
    std::vector<double> center;
    double half_width = 0.0;
    double edge = 0.0;
    // VP / VP10: nominal center count (coincident centers collapse, which
    // only happens at t_0 where every simulated path sits at P_0)
    std::size_t n_centers = 0;
    // GP
    std::size_t degree_y = 0;
    std::size_t degree_z = 0;
};

// One full experiment: a market, a payoff, a basis, and the Monte Carlo
// budget swept over m_grid with `repetitions` independent runs per point.
struct ExperimentSpec {
    double mu = 0.0;
    double sigma = 0.0;
    double s0 = 0.0;
    double maturity = 0.0;
    double r = 0.0;
    double borrow_rate = 0.0; // R

    Payoff::Tag payoff = Payoff::Tag::Call;
    double strike1 = 0.0;
    double strike2 = 0.0;
    Driver::Tag driver = Driver::Tag::DifferentialRates;
    AugmentationKind augmentation = AugmentationKind::Vanilla;
    Scheme scheme = Scheme::Euler;

    BasisConfig basis;
    std::size_t n_steps = 1;
    std::vector<std::size_t> m_grid;
    std::size_t repetitions = 50;
    int picard_iters = 3;
    std::uint64_t base_seed = 42;
    double rank_tol = 1e-10;
    TruncationPolicy trunc_policy = TruncationPolicy::PayoffScaled;
    double trunc_c0 = 0.0;
    ExecMode mode = ExecMode::Parallel;

    void validate() const;
};

Driver make_driver(const ExperimentSpec& spec);
Payoff make_payoff(const ExperimentSpec& spec);

struct MGridEntry {
    std::size_t m = 0;
    double mean = 0.0;
    double std_dev = 0.0;
    double wall_time_s = 0.0;
    std::vector<double> values; // one per repetition
};

struct ExperimentReport {
    std::vector<MGridEntry> entries;
};

// Sample mean and the (n-1)-normalized standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

// Everything one repetition's solve consumes, exposed so tests and tools can
// run alternative solvers on identical inputs.
struct PreparedRun {
    PathEnsemble ensemble;
    BasisFamily basis;
    SolverConfig config;
    Driver driver;
    Payoff payoff;
};

PreparedRun prepare_repetition(const ExperimentSpec& spec, std::size_t n_paths,
    std::size_t rep_index, bool collect_gram = false);

// One independent run of the solver: fresh paths (and fresh Voronoi centers,
// from a disjoint seed stream) derived from (base_seed, n_paths, rep_index).
// Execution order of repetitions cannot change any value.
double run_single_repetition(const ExperimentSpec& spec, std::size_t n_paths,
    std::size_t rep_index);

// Same run, returning the full solver output (used for diagnostics).
BackwardResult run_repetition_detailed(const ExperimentSpec& spec, std::size_t n_paths,
    std::size_t rep_index, bool collect_gram = false);

ExperimentReport run_experiment(const ExperimentSpec& spec);

enum class ReportFormat { Csv, Json };

std::string format_report(const ExperimentReport& report, ReportFormat format);
void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path);
ExperimentReport parse_report_json(const std::string& text);

// Built-in experiment configurations reproducing the published tables;
// column is 1-based.
ExperimentSpec preset(const std::string& name, std::size_t column = 1);
std::size_t preset_columns(const std::string& name);
std::vector<std::string> preset_names();

std::string spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const std::string& text);

} // namespace bsde
