#include "tactile/sdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tactile/errors.hpp"
#include "tactile/rng.hpp"

namespace tactile {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw InvalidArgument("probability outside [0, 1]");
    }
    // Acklam's rational approximation, then two Newton steps on erfc.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double lo = 0.02425;
    double x;
    if (p < lo) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - lo) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    for (int i = 0; i < 2; ++i) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
        x -= u / (1 + x * u / 2);
    }
    return x;
}

Criterion fit_criterion(const std::vector<double>& samples_a, const std::vector<double>& samples_b) {
    if (samples_a.empty() || samples_b.empty()) throw InvalidArgument("fit_criterion needs non-empty sample sets");
    std::vector<double> a = samples_a, b = samples_b;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> pooled;
    pooled.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(pooled));
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    const auto na = static_cast<std::int64_t>(a.size());
    const auto nb = static_cast<std::int64_t>(b.size());
    std::vector<double> candidates;
    for (std::size_t i = 0; i + 1 < pooled.size(); ++i) candidates.push_back(0.5 * (pooled[i] + pooled[i + 1]));
    if (candidates.empty()) candidates.push_back(pooled.front());

    // Scores in integer units of 1 / (2 na nb) so ties are exact.
    std::int64_t best = -1;
    double best_c = 0.0;
    bool best_rev = false;
    std::size_t ia = 0, ib = 0;
    for (double c : candidates) {
        while (ia < a.size() && a[ia] <= c) ++ia;
        while (ib < b.size() && b[ib] <= c) ++ib;
        const std::int64_t a_le = static_cast<std::int64_t>(ia), b_gt = nb - static_cast<std::int64_t>(ib);
        const std::int64_t fwd = a_le * nb + b_gt * na;
        const std::int64_t rev = 2 * na * nb - fwd;
        for (int pass = 0; pass < 2; ++pass) {
            const std::int64_t s = pass == 0 ? fwd : rev;
            const bool better = s > best || (s == best && std::fabs(c) < std::fabs(best_c)) ||
                                (s == best && std::fabs(c) == std::fabs(best_c) && pass == 0 && best_rev);
            if (better) {
                best = s;
                best_c = c;
                best_rev = pass == 1;
            }
        }
    }
    return {best_c, best_rev, static_cast<double>(best) / (2.0 * static_cast<double>(na) * static_cast<double>(nb))};
}

double yes_no_rate(const std::vector<double>& samples, double c) {
    if (samples.empty()) throw InvalidArgument("yes_no_rate needs samples");
    std::size_t above = 0;
    for (double x : samples) above += x > c ? 1 : 0;
    return static_cast<double>(above) / static_cast<double>(samples.size());
}

DecisionModel fit_decision_model(double period, const std::vector<double>& samples_a,
                                 const std::vector<double>& samples_b) {
    DecisionModel m;
    m.period = period;
    m.criterion = fit_criterion(samples_a, samples_b);
    m.q = yes_no_rate(samples_a, m.criterion.c);
    m.h = yes_no_rate(samples_b, m.criterion.c);
    m.n_a = samples_a.size();
    m.n_b = samples_b.size();
    return m;
}

std::pair<double, double> same_different_rates(double q, double h) {
    if (!(q >= 0.0 && q <= 1.0) || !(h >= 0.0 && h <= 1.0)) throw InvalidArgument("rates must lie in [0, 1]");
    return {h * (1 - q) + q * (1 - h), 2 * q * (1 - q)};
}

double percent_correct(double p_r2_s2, double p_r2_s1) {
    if (!(p_r2_s2 >= 0.0 && p_r2_s2 <= 1.0) || !(p_r2_s1 >= 0.0 && p_r2_s1 <= 1.0))
        throw InvalidArgument("probabilities must lie in [0, 1]");
    return (p_r2_s2 + (1 - p_r2_s1)) / 2;
}

namespace {

double clip_rate(double r, std::size_t n) {
    if (n == 0) return r;
    const double e = 1.0 / (2.0 * static_cast<double>(n));
    return std::clamp(r, e, 1.0 - e);
}

}  // namespace

double d_prime(double h, double q, std::size_t n_h, std::size_t n_q) {
    if (!(h >= 0.0 && h <= 1.0) || !(q >= 0.0 && q <= 1.0)) throw InvalidArgument("rates must lie in [0, 1]");
    h = clip_rate(h, n_h);
    q = clip_rate(q, n_q);
    if (h <= 0.0 || h >= 1.0 || q <= 0.0 || q >= 1.0) throw InvalidArgument("rate of 0 or 1 needs a sample count to clip");
    return normal_quantile(h) - normal_quantile(q);
}

std::optional<double> first_crossing(const std::vector<double>& periods, const std::vector<double>& pc,
                                     double threshold) {
    if (periods.size() != pc.size() || periods.empty()) throw InvalidArgument("periods and pc must align");
    if (pc[0] >= threshold) return periods[0];
    for (std::size_t i = 0; i + 1 < pc.size(); ++i) {
        if (pc[i] < threshold && pc[i + 1] >= threshold) {
            const double f = (threshold - pc[i]) / (pc[i + 1] - pc[i]);
            return periods[i] + f * (periods[i + 1] - periods[i]);
        }
    }
    return std::nullopt;
}

PsychometricCurve build_curve(const std::vector<DecisionModel>& models, double jnd_threshold, double inflection) {
    if (models.size() < 2) throw InvalidArgument("a psychometric curve needs at least two periods");
    PsychometricCurve curve;
    for (const auto& m : models) {
        CurvePoint p;
        p.period = m.period;
        std::tie(p.p_r2_s2, p.p_r2_s1) = same_different_rates(m.q, m.h);
        p.pc = percent_correct(p.p_r2_s2, p.p_r2_s1);
        p.dprime = d_prime(m.h, m.q, m.n_b, m.n_a);
        p.reversed = m.criterion.reversed;
        curve.points.push_back(p);
    }
    std::stable_sort(curve.points.begin(), curve.points.end(),
                     [](const CurvePoint& x, const CurvePoint& y) { return x.period < y.period; });
    std::vector<double> per, pc;
    for (const auto& p : curve.points) {
        per.push_back(p.period);
        pc.push_back(p.pc);
    }
    curve.jnd = first_crossing(per, pc, jnd_threshold);

    auto sd = [](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size()));
    };
    std::vector<double> low, high;
    for (const auto& p : curve.points) (p.period <= inflection ? low : high).push_back(p.dprime);
    curve.sigma_dprime_low = sd(low);
    curve.sigma_dprime_high = sd(high);
    return curve;
}

GaussianOracleResult gaussian_oracle(double separation, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("oracle needs n > 0");
    Rng ra(seed, {1}), rb(seed, {2});
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = ra.normal();
    for (auto& x : b) x = separation + rb.normal();
    const DecisionModel m = fit_decision_model(0.0, a, b);
    GaussianOracleResult r;
    r.criterion = m.criterion.c;
    r.q = m.q;
    r.h = m.h;
    r.dprime = d_prime(m.h, m.q, n, n);
    std::tie(r.p_r2_s2, r.p_r2_s1) = same_different_rates(m.q, m.h);
    r.pc = percent_correct(r.p_r2_s2, r.p_r2_s1);
    return r;
}

std::pair<double, double> monte_carlo_same_different(double q, double h, std::size_t trials, std::uint64_t seed) {
    if (!(q >= 0.0 && q <= 1.0) || !(h >= 0.0 && h <= 1.0)) throw InvalidArgument("rates must lie in [0, 1]");
    Rng rng(seed);
    std::size_t diff_s1 = 0, diff_s2 = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        // S1 = AA, S2 = AB; "different" when the covert labels disagree
        const bool a1 = rng.uniform() < q, a2 = rng.uniform() < q;
        const bool b1 = rng.uniform() < q, b2 = rng.uniform() < h;
        diff_s1 += a1 != a2;
        diff_s2 += b1 != b2;
    }
    return {static_cast<double>(diff_s2) / static_cast<double>(trials),
            static_cast<double>(diff_s1) / static_cast<double>(trials)};
}

}  // namespace tactile
