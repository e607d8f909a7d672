#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tactile/stimuli.hpp"

namespace tactile {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Vec2&) const = default;
};

struct SensorGeometry {
    int grid = 19;
    double pitch = 1.2;         // mm
    double dome_height = 2.0;   // mm, apex to rim

    int marker_count() const noexcept { return grid * grid; }
    int center_index() const noexcept { return (grid / 2) * grid + grid / 2; }
    double rim_radius() const noexcept { return (grid / 2) * pitch; }
    double active_area() const noexcept { return (grid * pitch) * (grid * pitch); }
    // marker i = row * grid + col; x grows with col, y with row
    std::vector<Vec2> rest_positions() const;
    void validate() const;
};

struct SkinParameters {
    double in_plane_stiffness = 9.0;        // membrane spring constant T
    double bending_penalty = 0.01;          // B
    double contact_stiffness_ratio = 1.0 / 9.0;  // gel restoring stiffness K = ratio * T
    double noise_sigma = 0.005;             // mm, per marker per frame
    double pin_length = 1.5;                // mm, lever from skin surface to marker
    double tip_radius = 0.4;                // mm, radius of the contacting pin tips
    double pin_base_width = 0.0;            // mm, square pin base; its mean surface tilt drives the lever (0 = point)
    double bulge_gain = 0.003;              // 1/mm^2, radial marker shift per unit displaced volume
    int subdivision = 3;                    // solver lattice nodes per marker pitch
    int max_iterations = 2000;
    double tolerance = 1e-8;                // energy units

    void validate() const;
};

struct Pose {
    double psi = 0.0;    // deg, yaw
    double phi = 0.0;    // deg, roll
    double theta = 0.0;  // deg, pitch
    double x = 0.0;      // mm
    double y = 0.0;      // mm
    double z = 0.0;      // mm, positive moves the sensor away from the stimulus
};

struct PressTrajectory {
    double start_clearance = 2.0;   // mm above the ridge tops
    double max_indentation = 2.5;   // mm
    double approach_speed = 3.0;    // mm/s
    double hold_duration = 3.0;     // s
    double frame_rate = 30.0;       // Hz
    bool include_release = true;

    void validate() const;
    // Indentation (mm, negative while clear) at every frame of the trapezoid.
    std::vector<double> schedule() const;
    // Frame indices where the hold starts and where the release starts.
    long hold_start_frame() const;
    long release_start_frame() const;
};

struct MarkerField {
    long frame_index = 0;
    double indentation = 0.0;
    std::vector<Vec2> positions;
    std::vector<Vec2> rest;
    std::vector<std::uint8_t> in_contact;
    // Inward normal displacement on the solver lattice; empty for ingested data.
    std::vector<double> lattice;

    Vec2 displacement(std::size_t i) const { return {positions[i].x - rest[i].x, positions[i].y - rest[i].y}; }
};

// Reusable contact solver for one geometry / parameter set. Not thread safe;
// give each concurrent press its own instance.
class SkinSolver {
public:
    SkinSolver(SensorGeometry geometry, SkinParameters params);

    const SensorGeometry& geometry() const noexcept { return geometry_; }
    const SkinParameters& params() const noexcept { return params_; }
    int lattice_size() const noexcept { return n_; }
    double lattice_spacing() const noexcept { return h_; }

    // Lower bound on the lattice displacement imposed by the stimulus.
    std::vector<double> lower_bound(const StimulusProfile& stimulus, const Pose& pose, double indentation) const;

    // Minimise the skin energy subject to non-penetration. warm may be empty.
    // Throws SolverFailure if the iteration budget runs out.
    std::vector<double> solve_lattice(const std::vector<double>& lb, const std::vector<double>& warm,
                                      double* residual = nullptr, int* iterations = nullptr) const;

    double lattice_energy(const std::vector<double>& w) const;
    std::vector<double> lattice_gradient(const std::vector<double>& w) const;
    double lipschitz() const noexcept { return lipschitz_; }

    // Noise-free marker field for a solved lattice.
    MarkerField markers(const std::vector<double>& w, const std::vector<double>& lb, double indentation) const;

private:
    SensorGeometry geometry_;
    SkinParameters params_;
    int n_;
    double h_;
    double lipschitz_;
    std::vector<double> node_x_;
    std::vector<double> dome_;
    std::vector<Vec2> rest_;
    std::vector<Vec2> rest_normals_;

    Vec2 normal_xy(const std::vector<double>& z, int r, int c) const;
    Vec2 base_normal_xy(const std::vector<double>& z, int r, int c) const;
    double sample(const std::vector<double>& z, double x, double y) const;
};

MarkerField solve_contact(const SensorGeometry& geometry, const SkinParameters& params,
                          const StimulusProfile& stimulus, const Pose& pose, double indentation);

std::vector<MarkerField> simulate_press(const SensorGeometry& geometry, const SkinParameters& params,
                                        const StimulusProfile& stimulus, const Pose& pose,
                                        const PressTrajectory& trajectory, std::uint64_t seed);

// Elastic energy of a solved field. A field without lattice state counts as rest.
double energy(const SensorGeometry& geometry, const SkinParameters& params, const MarkerField& field,
              const StimulusProfile& stimulus, const Pose& pose, double indentation);

// Frame-sequence CSV: frame,marker_row,marker_col,x_mm,y_mm (rows and cols
// 1-indexed). The rest positions are written first as frame -1.
void write_frames_csv(std::ostream& out, const std::vector<MarkerField>& frames, int grid = 19);
void write_frames_csv(const std::string& path, const std::vector<MarkerField>& frames, int grid = 19);

}  // namespace tactile
