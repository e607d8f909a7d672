#include "tactile/stimuli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "tactile/errors.hpp"

namespace tactile {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_mm(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

StimulusProfile make_flat_plate() { return StimulusProfile{}; }

StimulusProfile make_periodic_grating(double period, double depth, double orientation_deg) {
    if (!(period >= 0.0) || !std::isfinite(period)) throw InvalidArgument("period must be >= 0");
    if (!(depth >= 0.0) || !std::isfinite(depth)) throw InvalidArgument("groove depth must be >= 0");
    if (!std::isfinite(orientation_deg)) throw InvalidArgument("orientation must be finite");
    StimulusProfile p;
    p.kind_ = period > 0.0 ? StimulusKind::periodic : StimulusKind::flat;
    p.name_ = "P" + format_mm(period);
    p.period_ = period;
    p.depth_ = period > 0.0 ? depth : 0.0;
    p.orientation_deg_ = orientation_deg;
    return p;
}

StimulusProfile make_aperiodic_grating(const std::vector<double>& elements, double depth) {
    if (elements.empty()) throw InvalidArgument("aperiodic grating needs at least one bar");
    for (double e : elements)
        if (!(e > 0.0) || !std::isfinite(e)) throw InvalidArgument("bar and gap widths must be > 0");
    if (!(depth >= 0.0) || !std::isfinite(depth)) throw InvalidArgument("groove depth must be >= 0");
    StimulusProfile p;
    p.kind_ = StimulusKind::aperiodic;
    p.elements_ = elements;
    p.depth_ = depth;
    std::string n = "bars";
    for (double e : elements) n += "_" + format_mm(e);
    p.name_ = n;
    return p;
}

double StimulusProfile::width() const noexcept {
    double w = 0.0;
    for (double e : elements_) w += e;
    return w;
}

StimulusProfile StimulusProfile::rotated(double orientation_deg) const {
    if (!std::isfinite(orientation_deg)) throw InvalidArgument("orientation must be finite");
    StimulusProfile p = *this;
    p.orientation_deg_ = orientation_deg;
    return p;
}

StimulusProfile StimulusProfile::shifted(double origin_x, double origin_y) const {
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) throw InvalidArgument("origin must be finite");
    StimulusProfile p = *this;
    p.origin_x_ = origin_x;
    p.origin_y_ = origin_y;
    return p;
}

StimulusProfile StimulusProfile::named(std::string name) const {
    StimulusProfile p = *this;
    p.name_ = std::move(name);
    return p;
}

double StimulusProfile::cross_coordinate(double x, double y) const noexcept {
    const double a = orientation_deg_ * std::numbers::pi / 180.0;
    return (x - origin_x_) * std::cos(a) + (y - origin_y_) * std::sin(a);
}

double StimulusProfile::profile_height(double s) const noexcept {
    switch (kind_) {
        case StimulusKind::flat:
            return 0.0;
        case StimulusKind::periodic: {
            // phase in [0, P): ridge on (-P/4, P/4), groove elsewhere
            double ph = std::fmod(s + period_ / 4.0, period_);
            if (ph < 0.0) ph += period_;
            return (ph > 0.0 && ph < period_ / 2.0) ? 0.0 : -depth_;
        }
        case StimulusKind::aperiodic: {
            double x = -width() / 2.0;
            if (s <= x) return -kInf;
            for (std::size_t k = 0; k < elements_.size(); ++k) {
                const double next = x + elements_[k];
                const bool bar = k % 2 == 0;
                if (s < next) return bar ? 0.0 : -depth_;
                // on an edge the lower neighbour wins
                if (s == next) return k + 1 == elements_.size() ? -kInf : -depth_;
                x = next;
            }
            return -kInf;
        }
    }
    return 0.0;
}

std::vector<Segment> StimulusProfile::segments(double s0, double s1) const {
    std::vector<Segment> out;
    if (s1 < s0) std::swap(s0, s1);
    switch (kind_) {
        case StimulusKind::flat:
            out.push_back({s0, s1, 0.0});
            break;
        case StimulusKind::periodic: {
            const double half = period_ / 2.0;
            // boundaries at -P/4 + k*P/2; even k starts a ridge
            long k = static_cast<long>(std::floor((s0 + period_ / 4.0) / half));
            for (;; ++k) {
                const double a = -period_ / 4.0 + k * half;
                if (a > s1) break;
                const bool ridge = ((k % 2) + 2) % 2 == 0;
                out.push_back({a, a + half, ridge ? 0.0 : -depth_});
            }
            break;
        }
        case StimulusKind::aperiodic: {
            const double w = width();
            double x = -w / 2.0;
            if (s0 < x) out.push_back({-kInf, x, -kInf});
            for (std::size_t k = 0; k < elements_.size(); ++k) {
                const double next = x + elements_[k];
                if (next >= s0 && x <= s1) out.push_back({x, next, k % 2 == 0 ? 0.0 : -depth_});
                x = next;
            }
            if (s1 > x) out.push_back({x, kInf, -kInf});
            break;
        }
    }
    return out;
}

double StimulusProfile::tip_height(double s, double rho) const {
    if (rho <= 0.0) return profile_height(s);
    double best = -kInf;
    for (const Segment& seg : segments(s - rho, s + rho)) {
        if (seg.height == -kInf) continue;
        const double d = std::max({0.0, seg.a - s, s - seg.b});
        if (d > rho) continue;
        best = std::max(best, seg.height + std::sqrt(std::max(0.0, rho * rho - d * d)) - rho);
    }
    return best;
}

double height_at(const StimulusProfile& profile, double x, double y) noexcept {
    return profile.profile_height(profile.cross_coordinate(x, y));
}

const StimulusProfile& GratingCatalogue::find(const std::string& name) const {
    for (const auto& p : aperiodic_set)
        if (p.name() == name) return p;
    for (const auto& p : periodic_set)
        if (p.name() == name) return p;
    std::string msg = "unknown stimulus '" + name + "'; catalogue:";
    for (const auto& n : names()) msg += " " + n;
    throw InvalidArgument(msg);
}

std::vector<std::string> GratingCatalogue::names() const {
    std::vector<std::string> out;
    for (const auto& p : aperiodic_set) out.push_back(p.name());
    for (const auto& p : periodic_set) out.push_back(p.name());
    return out;
}

GratingCatalogue default_catalogue() {
    GratingCatalogue c;
    const double depth = 1.5;
    c.aperiodic_set.push_back(make_aperiodic_grating({4.0}, depth).named("iso_bar"));
    for (double gap : {10.0, 6.0, 4.0, 3.0, 2.0, 1.0})
        c.aperiodic_set.push_back(make_aperiodic_grating({4.0, gap, 4.0}, depth).named("gap" + format_mm(gap)));
    for (double period : {0.0, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0})
        c.periodic_set.push_back(make_periodic_grating(period, depth, 0.0));
    return c;
}

GratingCatalogue load_catalogue(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open stimulus catalogue: " + path);
    nlohmann::json j;
    try {
        in >> j;
        GratingCatalogue c;
        for (const auto& e : j.at("aperiodic")) {
            auto p = make_aperiodic_grating(e.at("elements").get<std::vector<double>>(), e.at("depth").get<double>());
            c.aperiodic_set.push_back(p.named(e.at("name").get<std::string>()));
        }
        for (const auto& e : j.at("periodic")) {
            auto p = make_periodic_grating(e.at("period").get<double>(), e.at("depth").get<double>(), 0.0);
            if (e.contains("name")) p = p.named(e.at("name").get<std::string>());
            c.periodic_set.push_back(p);
        }
        return c;
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidArgument("malformed stimulus catalogue " + path + ": " + ex.what());
    }
}

void save_catalogue(const GratingCatalogue& catalogue, const std::string& path) {
    nlohmann::json j;
    j["aperiodic"] = nlohmann::json::array();
    for (const auto& p : catalogue.aperiodic_set)
        j["aperiodic"].push_back({{"name", p.name()}, {"elements", p.elements()}, {"depth", p.depth()}});
    j["periodic"] = nlohmann::json::array();
    for (const auto& p : catalogue.periodic_set)
        j["periodic"].push_back({{"name", p.name()}, {"period", p.period()}, {"depth", p.depth()}});
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write stimulus catalogue: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace tactile
