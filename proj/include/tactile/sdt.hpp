#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace tactile {

struct Criterion {
    double c = 0.0;
    // True when responding "B" below c beats responding "B" above it.
    bool reversed = false;
    // Yes-no percent correct achieved by the chosen rule.
    double percent_correct = 0.5;
};

struct DecisionModel {
    double period = 0.0;
    Criterion criterion;
    double q = 0.0;  // P(x > c | A)
    double h = 0.0;  // P(x > c | B)
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

struct CurvePoint {
    double period = 0.0;
    double p_r2_s2 = 0.0;
    double p_r2_s1 = 0.0;
    double pc = 0.5;
    double dprime = 0.0;
    bool reversed = false;
};

struct PsychometricCurve {
    std::vector<CurvePoint> points;
    std::optional<double> jnd;  // empty: threshold not reached
    double sigma_dprime_low = 0.0;
    double sigma_dprime_high = 0.0;
};

double normal_cdf(double x);
double normal_quantile(double p);

Criterion fit_criterion(const std::vector<double>& samples_a, const std::vector<double>& samples_b);
double yes_no_rate(const std::vector<double>& samples, double c);
DecisionModel fit_decision_model(double period, const std::vector<double>& samples_a,
                                 const std::vector<double>& samples_b);

// Returns (P(R2|S2), P(R2|S1)) for independent covert yes-no decisions.
std::pair<double, double> same_different_rates(double q, double h);
double percent_correct(double p_r2_s2, double p_r2_s1);

// z(h) - z(q). Rates of 0 or 1 are clipped to 1/(2n), 1 - 1/(2n) using the
// sample count of that rate; pass n = 0 when the rates are already interior.
double d_prime(double h, double q, std::size_t n_h = 0, std::size_t n_q = 0);

PsychometricCurve build_curve(const std::vector<DecisionModel>& models, double jnd_threshold = 0.75,
                              double inflection = 2.0);
// JND by first upward crossing of the interpolated percent-correct curve.
std::optional<double> first_crossing(const std::vector<double>& periods, const std::vector<double>& pc,
                                     double threshold);

struct GaussianOracleResult {
    double criterion;
    double q;
    double h;
    double dprime;
    double p_r2_s2;
    double p_r2_s1;
    double pc;
};

// Full pipeline on A ~ N(0,1), B ~ N(separation,1).
GaussianOracleResult gaussian_oracle(double separation, std::size_t n, std::uint64_t seed);

// Simulated two-interval trials with independent covert decisions; used to
// check the closed-form same-different rates.
std::pair<double, double> monte_carlo_same_different(double q, double h, std::size_t trials, std::uint64_t seed);

}  // namespace tactile
