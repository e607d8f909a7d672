#include "tactile/skin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include "tactile/errors.hpp"
#include "tactile/rng.hpp"

namespace tactile {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deg(double a) { return a * std::numbers::pi / 180.0; }

}  // namespace

std::vector<Vec2> SensorGeometry::rest_positions() const {
    std::vector<Vec2> out(marker_count());
    const int c = grid / 2;
    for (int r = 0; r < grid; ++r)
        for (int k = 0; k < grid; ++k) out[r * grid + k] = {(k - c) * pitch, (r - c) * pitch};
    return out;
}

void SensorGeometry::validate() const {
    if (grid != 19) throw InvalidArgument("marker grid must be 19x19");
    if (!(pitch > 0.0) || !std::isfinite(pitch)) throw InvalidArgument("marker pitch must be > 0");
    if (!(dome_height >= 0.0) || !std::isfinite(dome_height)) throw InvalidArgument("dome height must be >= 0");
}

void SkinParameters::validate() const {
    if (!(in_plane_stiffness > 0.0)) throw InvalidArgument("in_plane_stiffness must be > 0");
    if (!(bending_penalty > 0.0)) throw InvalidArgument("bending_penalty must be > 0");
    if (!(contact_stiffness_ratio > 0.0)) throw InvalidArgument("contact_stiffness_ratio must be > 0");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("noise_sigma must be >= 0");
    if (!(pin_length >= 0.0)) throw InvalidArgument("pin_length must be >= 0");
    if (!(tip_radius >= 0.0)) throw InvalidArgument("tip_radius must be >= 0");
    if (!(pin_base_width >= 0.0) || !std::isfinite(pin_base_width)) throw InvalidArgument("pin_base_width must be >= 0");
    if (!(bulge_gain >= 0.0)) throw InvalidArgument("bulge_gain must be >= 0");
    if (subdivision < 1) throw InvalidArgument("subdivision must be >= 1");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
}

void PressTrajectory::validate() const {
    if (!(max_indentation > 0.0) || !std::isfinite(max_indentation)) throw InvalidArgument("max_indentation must be > 0");
    if (!(approach_speed > 0.0) || !std::isfinite(approach_speed)) throw InvalidArgument("approach_speed must be > 0");
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw InvalidArgument("frame_rate must be > 0");
    if (!(hold_duration >= 0.0) || !std::isfinite(hold_duration)) throw InvalidArgument("hold_duration must be >= 0");
    if (!(start_clearance >= 0.0) || !std::isfinite(start_clearance)) throw InvalidArgument("start_clearance must be >= 0");
}

long PressTrajectory::hold_start_frame() const {
    const double t1 = (max_indentation + start_clearance) / approach_speed;
    return static_cast<long>(std::ceil(t1 * frame_rate - 1e-9));
}

long PressTrajectory::release_start_frame() const {
    return hold_start_frame() + std::max(1L, std::lround(hold_duration * frame_rate));
}

std::vector<double> PressTrajectory::schedule() const {
    validate();
    std::vector<double> d;
    const long hs = hold_start_frame();
    const long rs = release_start_frame();
    for (long k = 0; k < hs; ++k) d.push_back(-start_clearance + approach_speed * k / frame_rate);
    for (long k = hs; k < rs; ++k) d.push_back(max_indentation);
    if (include_release) {
        for (long j = 1;; ++j) {
            const double v = max_indentation - approach_speed * j / frame_rate;
            if (v <= -start_clearance) {
                d.push_back(-start_clearance);
                break;
            }
            d.push_back(v);
        }
    }
    return d;
}

SkinSolver::SkinSolver(SensorGeometry geometry, SkinParameters params)
    : geometry_(geometry), params_(params) {
    geometry_.validate();
    params_.validate();
    const int m = params_.subdivision;
    n_ = (geometry_.grid - 1) * m + 1;
    h_ = geometry_.pitch / m;
    const double B = params_.bending_penalty;
    const double T = params_.in_plane_stiffness;
    const double K = params_.contact_stiffness_ratio * T;
    // bound on the Hessian: |lap|^2 <= 64/h^4, graph Laplacian <= 8
    lipschitz_ = h_ * h_ * (64.0 * B / std::pow(h_, 4) + K) + 8.0 * T;
    node_x_.resize(n_);
    for (int i = 0; i < n_; ++i) node_x_[i] = (i - (n_ - 1) / 2.0) * h_;
    const double R = geometry_.rim_radius();
    dome_.resize(static_cast<std::size_t>(n_) * n_);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) {
            const double x = node_x_[c], y = node_x_[r];
            dome_[r * n_ + c] = geometry_.dome_height * (x * x + y * y) / (R * R);
        }
    rest_ = geometry_.rest_positions();
    rest_normals_.resize(rest_.size());
    for (int i = 0; i < geometry_.grid; ++i)
        for (int j = 0; j < geometry_.grid; ++j) rest_normals_[i * geometry_.grid + j] = base_normal_xy(dome_, i * m, j * m);
}

std::vector<double> SkinSolver::lower_bound(const StimulusProfile& stimulus, const Pose& pose, double indentation) const {
    if (!std::isfinite(indentation)) throw InvalidArgument("indentation must be finite");
    const double cp = std::cos(deg(pose.psi)), sp = std::sin(deg(pose.psi));
    const double tx = std::tan(deg(pose.theta)), ty = std::tan(deg(pose.phi));
    std::vector<double> lb(dome_.size());
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) {
            const double X = node_x_[c], Y = node_x_[r];
            const double wx = pose.x + X * cp - Y * sp;
            const double wy = pose.y + X * sp + Y * cp;
            const double g = stimulus.tip_height(stimulus.cross_coordinate(wx, wy), params_.tip_radius);
            const std::size_t i = static_cast<std::size_t>(r) * n_ + c;
            if (g == -kInf) {
                lb[i] = -kInf;
                continue;
            }
            const double z_rest = dome_[i] - indentation + pose.z;
            lb[i] = g + tx * X + ty * Y - z_rest;
        }
    return lb;
}

double SkinSolver::lattice_energy(const std::vector<double>& w) const {
    const int n = n_;
    const double B = params_.bending_penalty;
    const double T = params_.in_plane_stiffness;
    const double K = params_.contact_stiffness_ratio * T;
    const double h2 = h_ * h_;
    double bend = 0.0, tension = 0.0, gel = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const double v = w[r * n + c];
            gel += v * v;
            if (c + 1 < n) tension += (w[r * n + c + 1] - v) * (w[r * n + c + 1] - v);
            if (r + 1 < n) tension += (w[(r + 1) * n + c] - v) * (w[(r + 1) * n + c] - v);
            if (r > 0 && r + 1 < n && c > 0 && c + 1 < n) {
                const double l = (w[(r + 1) * n + c] + w[(r - 1) * n + c] + w[r * n + c + 1] + w[r * n + c - 1] - 4 * v) / h2;
                bend += l * l;
            }
        }
    return 0.5 * B * bend * h2 + 0.5 * K * gel * h2 + 0.5 * T * tension;
}

std::vector<double> SkinSolver::lattice_gradient(const std::vector<double>& w) const {
    const int n = n_;
    const double B = params_.bending_penalty;
    const double T = params_.in_plane_stiffness;
    const double K = params_.contact_stiffness_ratio * T;
    const double h2 = h_ * h_;
    std::vector<double> lap(w.size(), 0.0), g(w.size(), 0.0);
    for (int r = 1; r + 1 < n; ++r)
        for (int c = 1; c + 1 < n; ++c)
            lap[r * n + c] = (w[(r + 1) * n + c] + w[(r - 1) * n + c] + w[r * n + c + 1] + w[r * n + c - 1] - 4 * w[r * n + c]) / h2;
    // bending: B h^2 lap^T lap w, with lap^T l = (sum of neighbours - 4 l) / h^2
    const double kb = B;  // h^2 / h^2
    for (int r = 1; r + 1 < n; ++r)
        for (int c = 1; c + 1 < n; ++c) {
            const double l = kb * lap[r * n + c];
            g[r * n + c] -= 4 * l;
            g[(r + 1) * n + c] += l;
            g[(r - 1) * n + c] += l;
            g[r * n + c + 1] += l;
            g[r * n + c - 1] += l;
        }
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const double v = w[r * n + c];
            double t = 0.0;
            if (c + 1 < n) t += v - w[r * n + c + 1];
            if (c > 0) t += v - w[r * n + c - 1];
            if (r + 1 < n) t += v - w[(r + 1) * n + c];
            if (r > 0) t += v - w[(r - 1) * n + c];
            g[r * n + c] += T * t + K * h2 * v;
        }
    return g;
}

std::vector<double> SkinSolver::solve_lattice(const std::vector<double>& lb, const std::vector<double>& warm,
                                              double* residual, int* iterations) const {
    const std::size_t N = lb.size();
    if (N != dome_.size()) throw InvalidArgument("lower bound has the wrong lattice size");
    if (!warm.empty() && warm.size() != N) throw InvalidArgument("warm start has the wrong lattice size");
    const double L = lipschitz_;
    const double step = 1.0 / L;

    std::vector<double> w(N), y, wn(N), p(N);
    for (std::size_t i = 0; i < N; ++i) w[i] = std::max(warm.empty() ? 0.0 : warm[i], lb[i]);
    y = w;

    // energy gap proxy: |G|^2 / (2L) with G = L (w - P(w - grad/L))
    auto stationarity = [&](const std::vector<double>& v) {
        const std::vector<double> gv = lattice_gradient(v);
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double d = v[i] - std::max(v[i] - step * gv[i], lb[i]);
            s += d * d;
        }
        return 0.5 * L * s;
    };

    double res = stationarity(w);
    double t = 1.0;
    int it = 0;
    while (res >= params_.tolerance) {
        if (it >= params_.max_iterations) {
            if (residual) *residual = res;
            if (iterations) *iterations = it;
            throw SolverFailure("contact solver did not converge", res);
        }
        const std::vector<double> gy = lattice_gradient(y);
        for (std::size_t i = 0; i < N; ++i) wn[i] = std::max(y[i] - step * gy[i], lb[i]);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        double dot = 0.0;
        for (std::size_t i = 0; i < N; ++i) dot += (y[i] - wn[i]) * (wn[i] - w[i]);
        if (dot > 0.0) {
            // adaptive restart
            t = 1.0;
            y = wn;
        } else {
            const double beta = (t - 1.0) / tn;
            for (std::size_t i = 0; i < N; ++i) y[i] = wn[i] + beta * (wn[i] - w[i]);
            t = tn;
        }
        w.swap(wn);
        ++it;
        if (it % 5 == 0 || it >= params_.max_iterations) res = stationarity(w);
    }
    if (residual) *residual = res;
    if (iterations) *iterations = it;
    return w;
}

Vec2 SkinSolver::normal_xy(const std::vector<double>& z, int r, int c) const {
    const int n = n_;
    auto at = [&](int rr, int cc) { return z[static_cast<std::size_t>(rr) * n + cc]; };
    double zx, zy;
    if (c == 0) zx = (at(r, 1) - at(r, 0)) / h_;
    else if (c == n - 1) zx = (at(r, n - 1) - at(r, n - 2)) / h_;
    else zx = (at(r, c + 1) - at(r, c - 1)) / (2 * h_);
    if (r == 0) zy = (at(1, c) - at(0, c)) / h_;
    else if (r == n - 1) zy = (at(n - 1, c) - at(n - 2, c)) / h_;
    else zy = (at(r + 1, c) - at(r - 1, c)) / (2 * h_);
    const double norm = std::sqrt(1.0 + zx * zx + zy * zy);
    return {-zx / norm, -zy / norm};
}

double SkinSolver::sample(const std::vector<double>& z, double x, double y) const {
    // bilinear, clamped to the lattice
    const double fx = std::clamp(x / h_ + (n_ - 1) / 2.0, 0.0, static_cast<double>(n_ - 1));
    const double fy = std::clamp(y / h_ + (n_ - 1) / 2.0, 0.0, static_cast<double>(n_ - 1));
    const int c0 = std::min(static_cast<int>(fx), n_ - 2), r0 = std::min(static_cast<int>(fy), n_ - 2);
    const double tx = fx - c0, ty = fy - r0;
    auto at = [&](int r, int c) { return z[static_cast<std::size_t>(r) * n_ + c]; };
    return (1 - ty) * ((1 - tx) * at(r0, c0) + tx * at(r0, c0 + 1)) + ty * ((1 - tx) * at(r0 + 1, c0) + tx * at(r0 + 1, c0 + 1));
}

Vec2 SkinSolver::base_normal_xy(const std::vector<double>& z, int r, int c) const {
    const double W = params_.pin_base_width;
    if (W <= 0.0) return normal_xy(z, r, c);
    // Mean gradient over a W x W base: the x-difference across the base,
    // averaged along y (and vice versa), by 9-point Simpson rule.
    const double x0 = node_x_[c], y0 = node_x_[r];
    const double lim = node_x_.back();
    const double xl = std::max(x0 - W / 2, -lim), xr = std::min(x0 + W / 2, lim);
    const double yl = std::max(y0 - W / 2, -lim), yr = std::min(y0 + W / 2, lim);
    constexpr int kS = 8;
    double zx = 0.0, zy = 0.0, wsum = 0.0;
    for (int k = 0; k <= kS; ++k) {
        const double wk = (k == 0 || k == kS) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        const double t = -W / 2 + W * k / kS;
        zx += wk * (sample(z, xr, y0 + t) - sample(z, xl, y0 + t));
        zy += wk * (sample(z, x0 + t, yr) - sample(z, x0 + t, yl));
        wsum += wk;
    }
    zx /= wsum * (xr - xl);
    zy /= wsum * (yr - yl);
    const double norm = std::sqrt(1.0 + zx * zx + zy * zy);
    return {-zx / norm, -zy / norm};
}

MarkerField SkinSolver::markers(const std::vector<double>& w, const std::vector<double>& lb, double indentation) const {
    const int m = params_.subdivision;
    const int G = geometry_.grid;
    std::vector<double> z(dome_.size());
    double volume = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = dome_[i] + w[i];
        volume += w[i];
    }
    volume *= h_ * h_;
    const double bulge = params_.bulge_gain * volume / geometry_.rim_radius();

    MarkerField f;
    f.indentation = indentation;
    f.rest = rest_;
    f.positions.resize(rest_.size());
    f.in_contact.assign(rest_.size(), 0);
    f.lattice = w;
    for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
            const int k = i * G + j;
            const Vec2 nrm = base_normal_xy(z, i * m, j * m);
            const Vec2& n0 = rest_normals_[k];
            f.positions[k] = {rest_[k].x + params_.pin_length * (nrm.x - n0.x) + bulge * rest_[k].x,
                              rest_[k].y + params_.pin_length * (nrm.y - n0.y) + bulge * rest_[k].y};
            const std::size_t node = static_cast<std::size_t>(i * m) * n_ + j * m;
            f.in_contact[k] = (lb[node] > -kInf && w[node] - lb[node] <= 1e-6) ? 1 : 0;
        }
    return f;
}

MarkerField solve_contact(const SensorGeometry& geometry, const SkinParameters& params,
                          const StimulusProfile& stimulus, const Pose& pose, double indentation) {
    if (!(indentation >= 0.0)) throw InvalidArgument("indentation must be >= 0");
    SkinSolver solver(geometry, params);
    const auto lb = solver.lower_bound(stimulus, pose, indentation);
    return solver.markers(solver.solve_lattice(lb, {}), lb, indentation);
}

std::vector<MarkerField> simulate_press(const SensorGeometry& geometry, const SkinParameters& params,
                                        const StimulusProfile& stimulus, const Pose& pose,
                                        const PressTrajectory& trajectory, std::uint64_t seed) {
    const std::vector<double> depths = trajectory.schedule();
    SkinSolver solver(geometry, params);
    std::vector<MarkerField> frames;
    frames.reserve(depths.size());
    std::vector<double> w;
    MarkerField clean;
    for (std::size_t k = 0; k < depths.size(); ++k) {
        // repeated depths (the hold) reuse the previous statics exactly
        if (k == 0 || depths[k] != depths[k - 1]) {
            const auto lb = solver.lower_bound(stimulus, pose, depths[k]);
            try {
                w = solver.solve_lattice(lb, w);
            } catch (const SolverFailure& e) {
                throw SolverFailure(std::string(e.what()) + " at frame " + std::to_string(k), e.residual(),
                                    static_cast<long>(k));
            }
            clean = solver.markers(w, lb, depths[k]);
        }
        MarkerField f = clean;
        f.frame_index = static_cast<long>(k);
        if (params.noise_sigma > 0.0) {
            Rng rng(seed, {0x6a177e5ULL, static_cast<std::uint64_t>(k)});
            for (auto& p : f.positions) {
                p.x += params.noise_sigma * rng.normal();
                p.y += params.noise_sigma * rng.normal();
            }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

double energy(const SensorGeometry& geometry, const SkinParameters& params, const MarkerField& field,
              const StimulusProfile&, const Pose&, double) {
    if (field.lattice.empty()) return 0.0;
    SkinSolver solver(geometry, params);
    if (static_cast<int>(field.lattice.size()) != solver.lattice_size() * solver.lattice_size())
        throw InvalidArgument("marker field lattice does not match the skin parameters");
    return solver.lattice_energy(field.lattice);
}

void write_frames_csv(std::ostream& out, const std::vector<MarkerField>& frames, int grid) {
    out.precision(17);
    out << "frame,marker_row,marker_col,x_mm,y_mm\n";
    auto emit = [&](long frame, const std::vector<Vec2>& pos) {
        if (static_cast<int>(pos.size()) != grid * grid) throw InvalidArgument("marker field has the wrong marker count");
        for (int r = 0; r < grid; ++r)
            for (int c = 0; c < grid; ++c) {
                const Vec2& p = pos[r * grid + c];
                out << frame << ',' << r + 1 << ',' << c + 1 << ',' << p.x << ',' << p.y << '\n';
            }
    };
    if (!frames.empty()) emit(-1, frames.front().rest);
    for (const auto& f : frames) emit(f.frame_index, f.positions);
}

void write_frames_csv(const std::string& path, const std::vector<MarkerField>& frames, int grid) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    write_frames_csv(out, frames, grid);
}

}  // namespace tactile
