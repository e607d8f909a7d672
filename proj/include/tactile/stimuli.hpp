#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tactile {

enum class StimulusKind { flat, aperiodic, periodic };

// Piece of a 1D cross-section: open interval (a, b) at constant height.
struct Segment {
    double a;
    double b;
    double height;
};

// Rigid stimulus surface. Ridge tops sit at z = 0, grooves at -depth, and the
// space beside an aperiodic grating is open (height -inf, never contacted).
//
// Gratings are 1D profiles extruded along the groove axis. The cross-section
// coordinate is s = (x - x0) cos(psi) + (y - y0) sin(psi), so psi = 0 puts the
// grooves along y. Aperiodic elements are centred on s = 0; periodic gratings
// have a ridge centred on s = 0.
class StimulusProfile {
public:
    StimulusKind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    const std::vector<double>& elements() const noexcept { return elements_; }
    double period() const noexcept { return period_; }
    double depth() const noexcept { return depth_; }
    double orientation_deg() const noexcept { return orientation_deg_; }
    double origin_x() const noexcept { return origin_x_; }
    double origin_y() const noexcept { return origin_y_; }

    // Total width of an aperiodic element list, 0 otherwise.
    double width() const noexcept;

    // Same profile, different placement.
    StimulusProfile rotated(double orientation_deg) const;
    StimulusProfile shifted(double origin_x, double origin_y) const;
    StimulusProfile named(std::string name) const;

    double cross_coordinate(double x, double y) const noexcept;

    // Height of the cross-section at s. On an exact edge the lower side wins.
    double profile_height(double s) const noexcept;

    // Pieces of the cross-section overlapping [s0, s1], in increasing order.
    // Free space is reported with height -inf.
    std::vector<Segment> segments(double s0, double s1) const;

    // Highest point reachable by the bottom of a ball of radius rho centred
    // above s: the profile dilated by a hemispherical tip.
    double tip_height(double s, double rho) const;

    bool operator==(const StimulusProfile&) const = default;

private:
    friend StimulusProfile make_flat_plate();
    friend StimulusProfile make_periodic_grating(double, double, double);
    friend StimulusProfile make_aperiodic_grating(const std::vector<double>&, double);

    StimulusKind kind_ = StimulusKind::flat;
    std::string name_ = "flat";
    std::vector<double> elements_;
    double period_ = 0.0;
    double depth_ = 0.0;
    double orientation_deg_ = 0.0;
    double origin_x_ = 0.0;
    double origin_y_ = 0.0;
};

StimulusProfile make_flat_plate();
// period 0 degenerates to the flat plate.
StimulusProfile make_periodic_grating(double period, double depth, double orientation_deg);
// elements alternate bar, gap, bar, ... starting with a bar.
StimulusProfile make_aperiodic_grating(const std::vector<double>& elements, double depth);

double height_at(const StimulusProfile& profile, double x, double y) noexcept;

struct GratingCatalogue {
    std::vector<StimulusProfile> aperiodic_set;
    std::vector<StimulusProfile> periodic_set;

    // Looks up any entry by name; throws InvalidArgument listing the names.
    const StimulusProfile& find(const std::string& name) const;
    std::vector<std::string> names() const;
};

GratingCatalogue default_catalogue();
GratingCatalogue load_catalogue(const std::string& path);
void save_catalogue(const GratingCatalogue& catalogue, const std::string& path);

}  // namespace tactile
