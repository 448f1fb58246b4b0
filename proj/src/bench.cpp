#include "bsde/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "bsde/rng.hpp"

namespace bsde {

namespace {

using nlohmann::json;

constexpr std::uint64_t kPathStream = 0;
constexpr std::uint64_t kCenterStream = 1;

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

BasisFamily build_basis(const ExperimentSpec& spec, const PathEnsemble& ens,
    std::size_t n_paths, std::size_t rep_index) {
    const std::size_t dim = ens.aug_dim;
    const std::size_t q = ens.dim_q;
    const std::size_t n = spec.n_steps;

    switch (spec.basis.kind) {
        case BasisKind::HC: {
            HypercubeSpec hc;
            hc.center = spec.basis.center.empty()
                ? std::vector<double>(ens.aug(0, 0).begin(), ens.aug(0, 0).end())
                : spec.basis.center;
            if (hc.center.size() != dim) {
                throw std::invalid_argument("basis config: center dimension mismatch");
            }
            hc.half_width = spec.basis.half_width;
            hc.edge = spec.basis.edge;
            return build_hc(hc, n, q);
        }
        case BasisKind::VP:
        case BasisKind::VP10: {
            // Centers are extra simulated paths, drawn from a seed stream
            // disjoint from the regression paths.
            const auto seed = derive_seed(spec.base_seed, n_paths, rep_index, kCenterStream);
            const auto model = MarketModel::make_black_scholes(spec.mu, spec.sigma, spec.s0);
            auto extra = simulate(model, spec.scheme, n, spec.basis.n_centers, spec.maturity,
                seed, spec.mode);
            extra = augment(spec.augmentation, extra, spec.mu, spec.sigma, spec.mode);

            VoronoiSpec vs;
            vs.dim = dim;
            vs.centers_per_time.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                auto& flat = vs.centers_per_time[k];
                for (std::size_t i = 0; i < spec.basis.n_centers; ++i) {
                    const auto pt = extra.aug(k, i);
                    bool duplicate = false;
                    for (std::size_t j = 0; j + dim <= flat.size() && !duplicate; j += dim) {
                        bool equal = true;
                        for (std::size_t c = 0; c < dim; ++c) {
                            if (flat[j + c] != pt[c]) {
                                equal = false;
                                break;
                            }
                        }
                        duplicate = equal;
                    }
                    // All center paths start at the same P_0, so t_0 always
                    // collapses to a single cell; later steps are distinct a.s.
                    if (!duplicate) flat.insert(flat.end(), pt.begin(), pt.end());
                }
            }
            return spec.basis.kind == BasisKind::VP ? build_vp(vs, n, q) : build_vp10(vs, n, q);
        }
        case BasisKind::GP:
            return build_gp(spec.basis.degree_y, spec.basis.degree_z, dim, n, q);
    }
    throw std::invalid_argument("basis config: unknown kind");
}

} // namespace

Driver make_driver(const ExperimentSpec& spec) {
    switch (spec.driver) {
        case Driver::Tag::Zero:
            return Driver::zero();
        case Driver::Tag::LinearRiskNeutral: {
            if (!(spec.sigma > 0.0)) {
                throw std::invalid_argument("driver: sigma must be > 0 for the linear driver");
            }
            return Driver::linear_risk_neutral(spec.r, (spec.mu - spec.r) / spec.sigma);
        }
        case Driver::Tag::DifferentialRates:
            return Driver::differential_rates(spec.r, spec.borrow_rate, spec.mu, spec.sigma);
    }
    throw std::invalid_argument("driver: unknown tag");
}

Payoff make_payoff(const ExperimentSpec& spec) {
    switch (spec.payoff) {
        case Payoff::Tag::Call:
            return Payoff::call(spec.strike1);
        case Payoff::Tag::CallsCombination:
            return Payoff::calls_combination(spec.strike1, spec.strike2);
        case Payoff::Tag::AsianCall:
            return Payoff::asian_call(spec.strike1, spec.augmentation);
    }
    throw std::invalid_argument("payoff: unknown tag");
}

void ExperimentSpec::validate() const {
    if (!(s0 > 0.0)) throw std::invalid_argument("experiment: s0 must be > 0");
    if (!(maturity > 0.0)) throw std::invalid_argument("experiment: maturity must be > 0");
    if (!(sigma >= 0.0)) throw std::invalid_argument("experiment: sigma must be >= 0");
    if (n_steps < 1) throw std::invalid_argument("experiment: need at least one time step");
    if (m_grid.empty()) throw std::invalid_argument("experiment: empty path-count grid");
    for (std::size_t m : m_grid) {
        if (m < 1) throw std::invalid_argument("experiment: path counts must be >= 1");
    }
    if (repetitions < 2) throw std::invalid_argument("experiment: need at least 2 repetitions");
    if (picard_iters < 1) throw std::invalid_argument("experiment: need at least 1 iteration");
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) {
        throw std::invalid_argument("experiment: rank_tol must lie in (0, 1)");
    }
    if (trunc_policy == TruncationPolicy::Fixed && !(trunc_c0 > 0.0)) {
        throw std::invalid_argument("experiment: fixed truncation needs C_0 > 0");
    }

    const Payoff p = make_payoff(*this); // validates strikes
    if (p.augmentation != augmentation
        && !(p.tag != Payoff::Tag::AsianCall && augmentation == AugmentationKind::Vanilla)) {
        throw std::invalid_argument("experiment: payoff and state augmentation disagree");
    }
    make_driver(*this);

    switch (basis.kind) {
        case BasisKind::HC:
            if (!(basis.half_width > 0.0) || !(basis.edge > 0.0)) {
                throw std::invalid_argument("experiment: hypercube basis needs positive sizes");
            }
            break;
        case BasisKind::VP:
        case BasisKind::VP10:
            if (basis.n_centers < 1) {
                throw std::invalid_argument("experiment: Voronoi basis needs centers");
            }
            break;
        case BasisKind::GP:
            break;
    }
}

PreparedRun prepare_repetition(const ExperimentSpec& spec, std::size_t n_paths,
    std::size_t rep_index, bool collect_gram) {
    const auto seed = derive_seed(spec.base_seed, n_paths, rep_index, kPathStream);
    const auto model = MarketModel::make_black_scholes(spec.mu, spec.sigma, spec.s0);

    auto ens = simulate(model, spec.scheme, spec.n_steps, n_paths, spec.maturity, seed,
        spec.mode);
    if (spec.augmentation != AugmentationKind::Vanilla) {
        ens = augment(spec.augmentation, ens, spec.mu, spec.sigma, spec.mode);
    }
    auto basis = build_basis(spec, ens, n_paths, rep_index);

    SolverConfig cfg;
    cfg.n_steps = spec.n_steps;
    cfg.n_paths = n_paths;
    cfg.picard_iters = spec.picard_iters;
    cfg.rank_tol = spec.rank_tol;
    cfg.trunc_policy = spec.trunc_policy;
    cfg.trunc_c0 = spec.trunc_c0;
    cfg.mode = spec.mode;
    cfg.collect_gram = collect_gram;

    return PreparedRun{std::move(ens), std::move(basis), cfg, make_driver(spec),
        make_payoff(spec)};
}

BackwardResult run_repetition_detailed(const ExperimentSpec& spec, std::size_t n_paths,
    std::size_t rep_index, bool collect_gram) {
    const auto run = prepare_repetition(spec, n_paths, rep_index, collect_gram);
    return backward_solve(run.config, run.ensemble, run.basis, driver_fn(run.driver),
        payoff_fn(run.payoff));
}

double run_single_repetition(const ExperimentSpec& spec, std::size_t n_paths,
    std::size_t rep_index) {
    return run_repetition_detailed(spec, n_paths, rep_index).y0;
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.size() < 2) {
        throw std::invalid_argument("mean_std: need at least two values");
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentReport report;
    const bool par = spec.mode == ExecMode::Parallel;

    for (const std::size_t m : spec.m_grid) {
        MGridEntry entry;
        entry.m = m;
        entry.values.assign(spec.repetitions, 0.0);

        const auto t0 = std::chrono::steady_clock::now();
        std::exception_ptr error;

#pragma omp parallel for if (par) schedule(dynamic)
        for (std::int64_t rep = 0; rep < static_cast<std::int64_t>(spec.repetitions); ++rep) {
            try {
                entry.values[static_cast<std::size_t>(rep)] =
                    run_single_repetition(spec, m, static_cast<std::size_t>(rep));
            } catch (...) {
#pragma omp critical
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);

        for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
            if (!std::isfinite(entry.values[rep])) {
                throw std::runtime_error("experiment: repetition " + std::to_string(rep)
                    + " at M = " + std::to_string(m) + " produced a non-finite value");
            }
        }

        std::tie(entry.mean, entry.std_dev) = mean_std(entry.values);
        entry.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.entries.push_back(std::move(entry));
    }
    return report;
}

std::string format_report(const ExperimentReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json entries = json::array();
        for (const auto& e : report.entries) {
            entries.push_back({
                {"m", e.m},
                {"mean", e.mean},
                {"std", e.std_dev},
                {"wall_time_s", e.wall_time_s},
                {"values", e.values},
            });
        }
        return json{{"entries", entries}}.dump(2) + "\n";
    }

    std::string out = "m,mean,std,wall_time_s";
    const std::size_t reps = report.entries.empty() ? 0 : report.entries.front().values.size();
    for (std::size_t r = 0; r < reps; ++r) out += ",rep" + std::to_string(r);
    out += "\n";
    for (const auto& e : report.entries) {
        out += std::to_string(e.m) + "," + fmt17(e.mean) + "," + fmt17(e.std_dev) + ","
            + fmt17(e.wall_time_s);
        for (double v : e.values) out += "," + fmt17(v);
        out += "\n";
    }
    return out;
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open output file: " + path);
    os << format_report(report, format);
    if (!os) throw std::runtime_error("failed writing output file: " + path);
}

ExperimentReport parse_report_json(const std::string& text) {
    const json doc = json::parse(text);
    ExperimentReport report;
    for (const auto& e : doc.at("entries")) {
        MGridEntry entry;
        entry.m = e.at("m").get<std::size_t>();
        entry.mean = e.at("mean").get<double>();
        entry.std_dev = e.at("std").get<double>();
        entry.wall_time_s = e.at("wall_time_s").get<double>();
        entry.values = e.at("values").get<std::vector<double>>();
        report.entries.push_back(std::move(entry));
    }
    return report;
}

namespace {

void set_hc(ExperimentSpec& s, double lo, double hi, double edge, std::size_t dims) {
    s.basis.kind = BasisKind::HC;
    s.basis.center.assign(dims, 0.5 * (lo + hi));
    s.basis.half_width = 0.5 * (hi - lo);
    s.basis.edge = edge;
}

void set_vp(ExperimentSpec& s, BasisKind kind, std::size_t centers) {
    s.basis = BasisConfig{};
    s.basis.kind = kind;
    s.basis.n_centers = centers;
}

void set_gp(ExperimentSpec& s, std::size_t dy, std::size_t dz) {
    s.basis = BasisConfig{};
    s.basis.kind = BasisKind::GP;
    s.basis.degree_y = dy;
    s.basis.degree_z = dz;
}

void need_column(std::size_t column, std::size_t n) {
    if (column < 1 || column > n) {
        throw std::invalid_argument("preset: column out of range");
    }
}

// Market of the calls-combination experiments.
void combination_market(ExperimentSpec& s) {
    s.mu = 0.05;
    s.sigma = 0.2;
    s.r = 0.01;
    s.borrow_rate = 0.06;
    s.maturity = 0.25;
    s.s0 = 100.0;
    s.payoff = Payoff::Tag::CallsCombination;
    s.strike1 = 95.0;
    s.strike2 = 105.0;
    s.driver = Driver::Tag::DifferentialRates;
}

// Market of the Asian experiments (equal rates).
void asian_market(ExperimentSpec& s) {
    s.mu = 0.06;
    s.sigma = 0.2;
    s.r = 0.1;
    s.borrow_rate = 0.1;
    s.maturity = 1.0;
    s.s0 = 100.0;
    s.payoff = Payoff::Tag::AsianCall;
    s.strike1 = 100.0;
    s.driver = Driver::Tag::LinearRiskNeutral;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"table1", "table2", "table3", "table4", "table5", "table6"};
}

std::size_t preset_columns(const std::string& name) {
    if (name == "table1") return 2;
    if (name == "table2") return 3;
    if (name == "table3") return 4;
    if (name == "table4") return 4;
    if (name == "table5") return 3;
    if (name == "table6") return 1;
    throw std::invalid_argument("preset: unknown name '" + name + "'");
}

ExperimentSpec preset(const std::string& name, std::size_t column) {
    need_column(column, preset_columns(name));

    ExperimentSpec s;
    s.m_grid = {128, 512, 2048, 8192, 32768};

    if (name == "table1") {
        s.mu = 0.06;
        s.sigma = 0.2;
        s.r = 0.04;
        s.borrow_rate = 0.06;
        s.maturity = 0.5;
        s.s0 = 100.0;
        s.payoff = Payoff::Tag::Call;
        s.strike1 = 100.0;
        s.driver = Driver::Tag::DifferentialRates;
        if (column == 1) {
            s.n_steps = 5;
            set_hc(s, 60.0, 140.0, 5.0, 1);
        } else {
            s.n_steps = 10;
            set_hc(s, 60.0, 140.0, 1.0, 1);
        }
        return s;
    }
    if (name == "table2") {
        combination_market(s);
        if (column == 1) {
            s.n_steps = 5;
            set_hc(s, 60.0, 140.0, 5.0, 1);
        } else if (column == 2) {
            s.n_steps = 20;
            set_hc(s, 60.0, 200.0, 1.0, 1);
        } else {
            s.n_steps = 50;
            set_hc(s, 40.0, 200.0, 0.5, 1);
        }
        return s;
    }
    if (name == "table3") {
        combination_market(s);
        if (column == 1) {
            s.n_steps = 5;
            set_vp(s, BasisKind::VP, 16);
        } else if (column == 2) {
            s.n_steps = 20;
            set_vp(s, BasisKind::VP, 64);
        } else if (column == 3) {
            s.n_steps = 20;
            set_vp(s, BasisKind::VP, 10);
        } else {
            s.n_steps = 20;
            set_vp(s, BasisKind::VP10, 10);
        }
        return s;
    }
    if (name == "table4") {
        combination_market(s);
        if (column == 1) {
            s.n_steps = 5;
            set_gp(s, 1, 0);
        } else if (column == 2) {
            s.n_steps = 20;
            set_gp(s, 2, 1);
        } else if (column == 3) {
            s.n_steps = 50;
            set_gp(s, 4, 2);
        } else {
            s.n_steps = 50;
            set_gp(s, 9, 9);
        }
        return s;
    }
    if (name == "table5") {
        asian_market(s);
        s.augmentation = AugmentationKind::AsianRunningAverage;
        if (column == 1) {
            s.n_steps = 5;
            set_hc(s, 60.0, 200.0, 5.0, 2);
        } else if (column == 2) {
            s.n_steps = 20;
            set_hc(s, 60.0, 200.0, 1.0, 2);
        } else {
            s.n_steps = 50;
            set_hc(s, 60.0, 200.0, 0.5, 2);
        }
        return s;
    }
    // table6
    asian_market(s);
    s.augmentation = AugmentationKind::AsianCorrected;
    s.n_steps = 20;
    set_hc(s, 60.0, 200.0, 1.0, 2);
    s.m_grid = {2, 8, 32, 128, 512, 2048, 8192, 32768};
    return s;
}

namespace {

std::string payoff_name(Payoff::Tag t) {
    switch (t) {
        case Payoff::Tag::Call: return "call";
        case Payoff::Tag::CallsCombination: return "calls_combination";
        case Payoff::Tag::AsianCall: return "asian_call";
    }
    return "";
}

Payoff::Tag payoff_from(const std::string& s) {
    if (s == "call") return Payoff::Tag::Call;
    if (s == "calls_combination") return Payoff::Tag::CallsCombination;
    if (s == "asian_call") return Payoff::Tag::AsianCall;
    throw std::invalid_argument("config: unknown payoff '" + s + "'");
}

std::string driver_name(Driver::Tag t) {
    switch (t) {
        case Driver::Tag::Zero: return "zero";
        case Driver::Tag::LinearRiskNeutral: return "linear_risk_neutral";
        case Driver::Tag::DifferentialRates: return "differential_rates";
    }
    return "";
}

Driver::Tag driver_from(const std::string& s) {
    if (s == "zero") return Driver::Tag::Zero;
    if (s == "linear_risk_neutral") return Driver::Tag::LinearRiskNeutral;
    if (s == "differential_rates") return Driver::Tag::DifferentialRates;
    throw std::invalid_argument("config: unknown driver '" + s + "'");
}

std::string augmentation_name(AugmentationKind k) {
    switch (k) {
        case AugmentationKind::Vanilla: return "vanilla";
        case AugmentationKind::AsianRunningAverage: return "asian_running_average";
        case AugmentationKind::AsianCorrected: return "asian_corrected";
        case AugmentationKind::LookbackMinMax: return "lookback_min_max";
    }
    return "";
}

AugmentationKind augmentation_from(const std::string& s) {
    if (s == "vanilla") return AugmentationKind::Vanilla;
    if (s == "asian_running_average") return AugmentationKind::AsianRunningAverage;
    if (s == "asian_corrected") return AugmentationKind::AsianCorrected;
    if (s == "lookback_min_max") return AugmentationKind::LookbackMinMax;
    throw std::invalid_argument("config: unknown augmentation '" + s + "'");
}

std::string basis_name(BasisKind k) {
    switch (k) {
        case BasisKind::HC: return "hc";
        case BasisKind::VP: return "vp";
        case BasisKind::VP10: return "vp10";
        case BasisKind::GP: return "gp";
    }
    return "";
}

BasisKind basis_from(const std::string& s) {
    if (s == "hc") return BasisKind::HC;
    if (s == "vp") return BasisKind::VP;
    if (s == "vp10") return BasisKind::VP10;
    if (s == "gp") return BasisKind::GP;
    throw std::invalid_argument("config: unknown basis '" + s + "'");
}

} // namespace

std::string spec_to_json(const ExperimentSpec& spec) {
    json basis{{"kind", basis_name(spec.basis.kind)}};
    switch (spec.basis.kind) {
        case BasisKind::HC:
            basis["center"] = spec.basis.center;
            basis["half_width"] = spec.basis.half_width;
            basis["edge"] = spec.basis.edge;
            break;
        case BasisKind::VP:
        case BasisKind::VP10:
            basis["n_centers"] = spec.basis.n_centers;
            break;
        case BasisKind::GP:
            basis["degree_y"] = spec.basis.degree_y;
            basis["degree_z"] = spec.basis.degree_z;
            break;
    }

    json payoff{{"kind", payoff_name(spec.payoff)}, {"strike", spec.strike1}};
    if (spec.payoff == Payoff::Tag::CallsCombination) {
        payoff = {{"kind", payoff_name(spec.payoff)}, {"strike1", spec.strike1},
            {"strike2", spec.strike2}};
    }

    json trunc;
    switch (spec.trunc_policy) {
        case TruncationPolicy::PayoffScaled: trunc = {{"policy", "payoff_scaled"}}; break;
        case TruncationPolicy::Fixed:
            trunc = {{"policy", "fixed"}, {"c0", spec.trunc_c0}};
            break;
        case TruncationPolicy::None: trunc = {{"policy", "none"}}; break;
    }

    const json doc{
        {"model",
            {{"mu", spec.mu}, {"sigma", spec.sigma}, {"s0", spec.s0},
                {"maturity", spec.maturity}}},
        {"rates", {{"r", spec.r}, {"R", spec.borrow_rate}}},
        {"driver", driver_name(spec.driver)},
        {"payoff", payoff},
        {"augmentation", augmentation_name(spec.augmentation)},
        {"scheme", spec.scheme == Scheme::Euler ? "euler" : "log_euler"},
        {"basis", basis},
        {"n_steps", spec.n_steps},
        {"m_grid", spec.m_grid},
        {"repetitions", spec.repetitions},
        {"picard_iters", spec.picard_iters},
        {"base_seed", spec.base_seed},
        {"rank_tol", spec.rank_tol},
        {"truncation", trunc},
    };
    return doc.dump(2) + "\n";
}

ExperimentSpec spec_from_json(const std::string& text) {
    const json doc = json::parse(text);
    ExperimentSpec spec;

    const auto& model = doc.at("model");
    spec.mu = model.at("mu").get<double>();
    spec.sigma = model.at("sigma").get<double>();
    spec.s0 = model.at("s0").get<double>();
    spec.maturity = model.at("maturity").get<double>();

    const auto& rates = doc.at("rates");
    spec.r = rates.at("r").get<double>();
    spec.borrow_rate = rates.value("R", spec.r);

    spec.driver = driver_from(doc.at("driver").get<std::string>());

    const auto& payoff = doc.at("payoff");
    spec.payoff = payoff_from(payoff.at("kind").get<std::string>());
    if (spec.payoff == Payoff::Tag::CallsCombination) {
        spec.strike1 = payoff.at("strike1").get<double>();
        spec.strike2 = payoff.at("strike2").get<double>();
    } else {
        spec.strike1 = payoff.at("strike").get<double>();
    }

    spec.augmentation = augmentation_from(doc.value("augmentation", std::string{"vanilla"}));
    const auto scheme = doc.value("scheme", std::string{"euler"});
    if (scheme == "euler") {
        spec.scheme = Scheme::Euler;
    } else if (scheme == "log_euler") {
        spec.scheme = Scheme::LogEuler;
    } else {
        throw std::invalid_argument("config: unknown scheme '" + scheme + "'");
    }

    const auto& basis = doc.at("basis");
    spec.basis.kind = basis_from(basis.at("kind").get<std::string>());
    switch (spec.basis.kind) {
        case BasisKind::HC:
            spec.basis.center = basis.value("center", std::vector<double>{});
            spec.basis.half_width = basis.at("half_width").get<double>();
            spec.basis.edge = basis.at("edge").get<double>();
            break;
        case BasisKind::VP:
        case BasisKind::VP10:
            spec.basis.n_centers = basis.at("n_centers").get<std::size_t>();
            break;
        case BasisKind::GP:
            spec.basis.degree_y = basis.at("degree_y").get<std::size_t>();
            spec.basis.degree_z = basis.at("degree_z").get<std::size_t>();
            break;
    }

    spec.n_steps = doc.at("n_steps").get<std::size_t>();
    spec.m_grid = doc.at("m_grid").get<std::vector<std::size_t>>();
    spec.repetitions = doc.value("repetitions", std::size_t{50});
    spec.picard_iters = doc.value("picard_iters", 3);
    spec.base_seed = doc.value("base_seed", std::uint64_t{42});
    spec.rank_tol = doc.value("rank_tol", 1e-10);

    if (doc.contains("truncation")) {
        const auto& trunc = doc.at("truncation");
        const auto policy = trunc.at("policy").get<std::string>();
        if (policy == "payoff_scaled") {
            spec.trunc_policy = TruncationPolicy::PayoffScaled;
        } else if (policy == "fixed") {
            spec.trunc_policy = TruncationPolicy::Fixed;
            spec.trunc_c0 = trunc.at("c0").get<double>();
        } else if (policy == "none") {
            spec.trunc_policy = TruncationPolicy::None;
        } else {
            throw std::invalid_argument("config: unknown truncation policy '" + policy + "'");
        }
    }
    return spec;
}

} // namespace bsde
