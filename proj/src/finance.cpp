#include "bsde/finance.hpp"

#include <cmath>
#include <stdexcept>

namespace bsde {

namespace {

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

double positive_part(double a) { return a > 0.0 ? a : 0.0; }

} // namespace

Driver Driver::linear_risk_neutral(double r, double theta) {
    Driver d;
    d.tag = Tag::LinearRiskNeutral;
    d.r = r;
    d.borrow_rate = r;
    d.theta = theta;
    return d;
}

Driver Driver::differential_rates(double r, double borrow_rate, double mu, double sigma) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("differential_rates: sigma must be > 0");
    }
    if (borrow_rate < r) {
        throw std::invalid_argument("differential_rates: borrowing rate below lending rate");
    }
    Driver d;
    d.tag = Tag::DifferentialRates;
    d.r = r;
    d.borrow_rate = borrow_rate;
    d.mu = mu;
    d.sigma = sigma;
    d.theta = (mu - r) / sigma;
    return d;
}

double eval_driver(const Driver& driver, double /*t*/, std::span<const double> /*x*/, double y,
    std::span<const double> z) {
    switch (driver.tag) {
        case Driver::Tag::Zero:
            return 0.0;
        case Driver::Tag::LinearRiskNeutral:
            return -(y * driver.r + z[0] * driver.theta);
        case Driver::Tag::DifferentialRates: {
            const double shortfall = positive_part(-(y - z[0] / driver.sigma));
            return -(y * driver.r + z[0] * driver.theta
                - shortfall * (driver.borrow_rate - driver.r));
        }
    }
    throw std::invalid_argument("unknown driver");
}

Payoff Payoff::call(double strike) {
    if (!(strike > 0.0)) throw std::invalid_argument("call: strike must be > 0");
    Payoff p;
    p.tag = Tag::Call;
    p.strike1 = strike;
    return p;
}

Payoff Payoff::calls_combination(double strike1, double strike2) {
    if (!(strike1 > 0.0) || !(strike2 > 0.0) || !(strike1 < strike2)) {
        throw std::invalid_argument("calls_combination: need 0 < K1 < K2");
    }
    Payoff p;
    p.tag = Tag::CallsCombination;
    p.strike1 = strike1;
    p.strike2 = strike2;
    return p;
}

Payoff Payoff::asian_call(double strike, AugmentationKind kind) {
    if (!(strike > 0.0)) throw std::invalid_argument("asian_call: strike must be > 0");
    if (kind != AugmentationKind::AsianRunningAverage && kind != AugmentationKind::AsianCorrected) {
        throw std::invalid_argument("asian_call: needs an Asian state augmentation");
    }
    Payoff p;
    p.tag = Tag::AsianCall;
    p.strike1 = strike;
    p.augmentation = kind;
    return p;
}

double eval_payoff(const Payoff& payoff, std::span<const double> terminal_state) {
    if (terminal_state.size() != augmented_dim(payoff.augmentation, 1)) {
        throw std::invalid_argument("payoff: terminal state has wrong dimension");
    }
    switch (payoff.tag) {
        case Payoff::Tag::Call:
            return positive_part(terminal_state[0] - payoff.strike1);
        case Payoff::Tag::CallsCombination:
            return positive_part(terminal_state[0] - payoff.strike1)
                - 2.0 * positive_part(terminal_state[0] - payoff.strike2);
        case Payoff::Tag::AsianCall:
            return positive_part(terminal_state[1] - payoff.strike1);
    }
    throw std::invalid_argument("unknown payoff");
}

double black_scholes_call(double s0, double strike, double r, double sigma, double maturity) {
    if (!(s0 > 0.0) || !(strike > 0.0) || !(sigma > 0.0) || !(maturity > 0.0)) {
        throw std::invalid_argument("black_scholes_call: inputs must be positive");
    }
    const double vol = sigma * std::sqrt(maturity);
    const double d1 = (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * maturity) / vol;
    const double d2 = d1 - vol;
    return s0 * normal_cdf(d1) - strike * std::exp(-r * maturity) * normal_cdf(d2);
}

std::array<double, 4> combination_bounds(double s0, double strike1, double strike2, double r,
    double borrow_rate, double sigma, double maturity) {
    const double b1_high = black_scholes_call(s0, strike1, borrow_rate, sigma, maturity);
    const double b2_high = black_scholes_call(s0, strike2, borrow_rate, sigma, maturity);
    const double b1_low = black_scholes_call(s0, strike1, r, sigma, maturity);
    const double b2_low = black_scholes_call(s0, strike2, r, sigma, maturity);
    return {
        b1_high - 2.0 * b2_high,
        b1_low - 2.0 * b2_low,
        b1_low - 2.0 * b2_high,
        b1_high - 2.0 * b2_low,
    };
}

} // namespace bsde
