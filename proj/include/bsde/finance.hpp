#pragma once

#include <array>
#include <span>

#include "bsde/forward.hpp"

namespace bsde {

// Driver f(t, x, y, z) of the backward equation. The differential-rates
// driver prices under a borrowing rate R above the lending rate r:
//   f = -( y r + z theta - (y - z/sigma)^- (R - r) ),  theta = (mu - r)/sigma.
// With R = r it collapses to the linear risk-neutral driver -(y r + z theta).
struct Driver {
    enum class Tag { Zero, LinearRiskNeutral, DifferentialRates };

    Tag tag = Tag::Zero;
    double r = 0.0;
    double borrow_rate = 0.0; // R
    double mu = 0.0;
    double sigma = 0.0;
    double theta = 0.0; // market price of risk

    static Driver zero() { return {}; }
    static Driver linear_risk_neutral(double r, double theta);
    static Driver differential_rates(double r, double borrow_rate, double mu, double sigma);
};

double eval_driver(const Driver& driver, double t, std::span<const double> x, double y,
    std::span<const double> z);

// Terminal condition as a function of the augmented terminal state.
struct Payoff {
    enum class Tag { Call, CallsCombination, AsianCall };

    Tag tag = Tag::Call;
    double strike1 = 0.0;
    double strike2 = 0.0;
    // Augmentation the payoff reads its state from; AsianCall accepts either
    // Asian kind, the others are vanilla.
    AugmentationKind augmentation = AugmentationKind::Vanilla;

    static Payoff call(double strike);
    // (S - K1)+ - 2 (S - K2)+
    static Payoff calls_combination(double strike1, double strike2);
    static Payoff asian_call(double strike,
        AugmentationKind kind = AugmentationKind::AsianRunningAverage);
};

double eval_payoff(const Payoff& payoff, std::span<const double> terminal_state);

// Closed-form European call. The normal CDF goes through std::erfc, which is
// accurate to well below 1e-10 over the whole range.
double black_scholes_call(double s0, double strike, double r, double sigma, double maturity);

// The four Black-Scholes combinations bracketing the differential-rates
// price of (S-K1)+ - 2(S-K2)+: the first three are lower bounds, the last an
// upper bound. Order: (BS1(R)-2BS2(R), BS1(r)-2BS2(r), BS1(r)-2BS2(R),
// BS1(R)-2BS2(r)).
std::array<double, 4> combination_bounds(double s0, double strike1, double strike2, double r,
    double borrow_rate, double sigma, double maturity);

} // namespace bsde
