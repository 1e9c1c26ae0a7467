#ifndef SCANMATCH_SIMWORLD_HPP
#define SCANMATCH_SIMWORLD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scanmatch/core.hpp"
#include "scanmatch/odometry.hpp"
#include "scanmatch/scan_image.hpp"

namespace scanmatch {

struct Segment {
    Point2D a;
    Point2D b;
};

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(const Point2D& p) const
    {
        return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1;
    }
};

struct World {
    std::vector<Segment> segments;
    Rect bounds{};

    void add_box(double x0, double y0, double x1, double y1)
    {
        segments.push_back({{x0, y0}, {x1, y0}});
        segments.push_back({{x1, y0}, {x1, y1}});
        segments.push_back({{x1, y1}, {x0, y1}});
        segments.push_back({{x0, y1}, {x0, y0}});
    }

    void fit_bounds()
    {
        if (segments.empty()) {
            bounds = {};
            return;
        }
        bounds = {segments[0].a.x, segments[0].a.y, segments[0].a.x, segments[0].a.y};
        for (const auto& s : segments)
            for (const auto& p : {s.a, s.b}) {
                bounds.x0 = std::min(bounds.x0, p.x);
                bounds.y0 = std::min(bounds.y0, p.y);
                bounds.x1 = std::max(bounds.x1, p.x);
                bounds.y1 = std::max(bounds.y1, p.y);
            }
    }
};

/*
 * 8.5 m x 6.5 m room with box obstacles and a few wall features. The
 * scripted trajectories start at the origin facing +x and stay clear of
 * every obstacle.
 */
inline World lab_room()
{
    // cluttered 8.5 m x 6.5 m room: crates, pillars and shelving
    static constexpr double boxes[][4] = {
        {1500.0, 1000.0, 2300.0, 1800.0},
        {3300.0, 1200.0, 3900.0, 2200.0},
        {6200.0, 1000.0, 6600.0, 1400.0},
        {1000.0, -1900.0, 1300.0, -1600.0},
        {-1000.0, -1500.0, -800.0, -1300.0},
        {2500.0, -1200.0, 2700.0, -1000.0},
        {4000.0, -1500.0, 4300.0, -1200.0},
        {5800.0, -1200.0, 6000.0, -1000.0},
        {6500.0, -600.0, 7000.0, -100.0},
        {6600.0, 2800.0, 6800.0, 3000.0},
        {6300.0, 3800.0, 7000.0, 4500.0},
        {4200.0, 4100.0, 5000.0, 4500.0},
        {500.0, 3900.0, 1200.0, 4500.0},
        {-1500.0, 0.0, -1000.0, 600.0},
        {4500.0, 2600.0, 4700.0, 2800.0},
        {800.0, 2200.0, 1100.0, 2500.0},
        {3000.0, -2000.0, 3600.0, -1700.0},
        {5000.0, -1000.0, 5200.0, -800.0},
        {2600.0, 500.0, 3000.0, 800.0},
        {4200.0, 500.0, 4600.0, 900.0},
        {2700.0, 2400.0, 3200.0, 2800.0},
        {1500.0, 2500.0, 1800.0, 2800.0},
        {4300.0, 1500.0, 4600.0, 1800.0},
        {1600.0, -900.0, 2200.0, -600.0},
        {3400.0, -900.0, 3800.0, -500.0},
        {4600.0, -800.0, 4900.0, -500.0},
        {5700.0, 600.0, 6000.0, 900.0},
        {5700.0, 2000.0, 6100.0, 2300.0},
        {1800.0, 3950.0, 2000.0, 4150.0},
        {-1500.0, 1200.0, -1100.0, 1500.0},
        {-900.0, 1900.0, -700.0, 2100.0},
    };
    World w;
    w.add_box(-1500.0, -2000.0, 7000.0, 4500.0);
    for (const auto& b : boxes)
        w.add_box(b[0], b[1], b[2], b[3]);
    // cabinet against the north wall and a step in the west wall
    w.segments.push_back({{2500.0, 4500.0}, {2500.0, 4000.0}});
    w.segments.push_back({{2500.0, 4000.0}, {3300.0, 4000.0}});
    w.segments.push_back({{3300.0, 4000.0}, {3300.0, 4500.0}});
    w.segments.push_back({{-1500.0, 2500.0}, {-1100.0, 2500.0}});
    w.segments.push_back({{-1100.0, 2500.0}, {-1100.0, 4500.0}});
    w.bounds = {-1500.0, -2000.0, 7000.0, 4500.0};
    return w;
}

/* One segment per line: x1 y1 x2 y2 (mm). '#' starts a comment. */
inline World read_world(std::istream& is)
{
    World w;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        double v[4];
        int n = 0;
        while (n < 4 && ls >> v[n])
            ++n;
        if (n == 0 && ls.eof())
            continue;
        std::string rest;
        if (n != 4 || (ls >> rest))
            throw std::runtime_error("world file line " + std::to_string(lineno) +
                                     ": expected 'x1 y1 x2 y2'");
        w.segments.push_back({{v[0], v[1]}, {v[2], v[3]}});
    }
    w.fit_bounds();
    return w;
}

inline void write_world(std::ostream& os, const World& w)
{
    os << "# x1 y1 x2 y2 (mm)\n";
    for (const auto& s : w.segments)
        os << s.a.x << ' ' << s.a.y << ' ' << s.b.x << ' ' << s.b.y << '\n';
}

/* Distance along the ray to the segment, if it is hit ahead of the origin. */
inline std::optional<double> ray_segment(const Point2D& origin, double angle,
                                         const Segment& seg)
{
    const Point2D u{std::cos(angle), std::sin(angle)};
    const Point2D v = seg.b - seg.a;
    const double denom = u.x * v.y - u.y * v.x;
    if (std::abs(denom) < 1e-12)
        return std::nullopt;
    const Point2D w = seg.a - origin;
    const double t = (w.x * v.y - w.y * v.x) / denom;
    const double s = (w.x * u.y - w.y * u.x) / denom;
    if (t <= 0.0 || s < 0.0 || s > 1.0)
        return std::nullopt;
    return t;
}

inline std::optional<double> raycast(const World& world, const Point2D& origin,
                                     double angle)
{
    std::optional<double> best;
    for (const auto& seg : world.segments)
        if (auto t = ray_segment(origin, angle, seg); t && (!best || *t < *best))
            best = t;
    return best;
}

struct SensorNoise {
    double range_sigma = 5.0;       // mm
    double outlier_fraction = 0.0;  // eta
    std::uint64_t seed = 1;

    void validate() const
    {
        if (!(range_sigma >= 0.0))
            throw std::invalid_argument("SensorNoise: range_sigma must be >= 0");
        if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
            throw std::invalid_argument("SensorNoise: eta must lie in [0, 1)");
    }
};

struct ScanGeometry {
    std::size_t beam_count = 181;
    double fov = kPi;
    double max_range = 8000.0;
};

/*
 * Simulated sweep. Noise-free ranges are exact ray/segment distances; then
 * Gaussian range noise is added and round(eta * beams) beams, picked at
 * random, are replaced by ranges uniform on (0, max_range].
 */
inline LaserScan raycast_scan(const World& world, const Pose2D& pose,
                              const ScanGeometry& geom, const SensorNoise& noise)
{
    noise.validate();
    if (!world.bounds.contains(pose.position()))
        throw std::invalid_argument("raycast_scan: pose outside world bounds");

    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LaserScan scan;
    scan.max_range = geom.max_range;
    scan.beams.resize(geom.beam_count);
    for (std::size_t i = 0; i < geom.beam_count; ++i) {
        Beam& b = scan.beams[i];
        b.bearing = beam_bearing(i, geom.beam_count, geom.fov);
        const auto hit = raycast(world, pose.position(), pose.theta() + b.bearing);
        if (!hit || *hit >= geom.max_range) {
            b.range = geom.max_range;
            b.valid = false;
            continue;
        }
        double r = *hit;
        if (noise.range_sigma > 0.0)
            r += noise.range_sigma * gauss(rng);
        b.range = std::clamp(r, 1e-3, geom.max_range);
        b.valid = b.range < geom.max_range;
    }

    const auto n_out = static_cast<std::size_t>(
        std::llround(noise.outlier_fraction * static_cast<double>(geom.beam_count)));
    if (n_out > 0) {
        std::vector<std::size_t> idx(geom.beam_count);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (std::size_t k = 0; k < n_out; ++k) {
            Beam& b = scan.beams[idx[k]];
            // uniform on (0, max_range]
            b.range = geom.max_range * (1.0 - uni(rng));
            b.valid = b.range < geom.max_range;
        }
    }
    return scan;
}

struct SlipModel {
    double tick_noise_sigma = 0.0;  // fraction of ticks
    double turn_slip_gain = 0.0;    // extra fraction per radian of turn
    std::uint64_t seed = 1;

    void validate() const
    {
        if (!(tick_noise_sigma >= 0.0) || !(turn_slip_gain >= 0.0))
            throw std::invalid_argument("SlipModel: parameters must be >= 0");
    }
};

inline bool segments_cross(const Point2D& p, const Point2D& q, const Segment& s)
{
    auto orient = [](const Point2D& a, const Point2D& b, const Point2D& c) {
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    };
    const double d1 = orient(s.a, s.b, p);
    const double d2 = orient(s.a, s.b, q);
    const double d3 = orient(p, q, s.a);
    const double d4 = orient(p, q, s.b);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 &&
           d3 != 0 && d4 != 0;
}

struct DriveResult {
    Pose2D true_pose;
    WheelTicks ticks;
};

/*
 * Moves the true robot by exactly the commanded motion and reports what the
 * encoders would count, corrupted by wheel slip. Fractional ticks carry over
 * between steps like a real counter.
 */
class DriveSimulator {
public:
    DriveSimulator(World world, OdometryParams params, SlipModel slip)
        : world_(std::move(world)), params_(params), slip_(slip), rng_(slip.seed)
    {
        slip_.validate();
    }

    DriveResult step(const Pose2D& true_pose, const Displacement& commanded)
    {
        const Pose2D next = predict_pose(true_pose, commanded);
        if (!world_.bounds.contains(next.position()))
            throw std::runtime_error("drive: robot leaves the world bounds");
        for (const auto& s : world_.segments)
            if (segments_cross(true_pose.position(), next.position(), s))
                throw std::runtime_error("drive: robot collides with a wall");

        const FractionalTicks ideal = ticks_for(params_, commanded);
        const double sigma =
            slip_.tick_noise_sigma + slip_.turn_slip_gain * std::abs(commanded.rotation);
        double left = ideal.left;
        double right = ideal.right;
        if (sigma > 0.0) {
            left *= 1.0 + sigma * gauss_(rng_);
            right *= 1.0 + sigma * gauss_(rng_);
        }
        carry_left_ += left;
        carry_right_ += right;
        WheelTicks t{std::llround(carry_left_), std::llround(carry_right_)};
        carry_left_ -= static_cast<double>(t.left);
        carry_right_ -= static_cast<double>(t.right);
        return {next, t};
    }

    const World& world() const { return world_; }

private:
    World world_;
    OdometryParams params_;
    SlipModel slip_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    double carry_left_ = 0.0;
    double carry_right_ = 0.0;
};

namespace detail {

inline void straight(std::vector<Displacement>& out, int steps, double step_mm)
{
    for (int i = 0; i < steps; ++i)
        out.push_back({step_mm, 0.0});
}

inline void turn(std::vector<Displacement>& out, int steps, double step_mm,
                 double total_rad)
{
    for (int i = 0; i < steps; ++i)
        out.push_back({step_mm, total_rad / steps});
}

}  // namespace detail

/*
 * Built-in command scripts (200 ms sampling, ~200 mm/s):
 *   corridor_loop - 5 m x 3 m rectangle, turns in place, closes exactly
 *   sharp_turns   - same loop with 15 deg per step turns while moving
 *   figure_eight  - a left then a right circle of 800 mm radius
 */
inline std::vector<Displacement> scripted_trajectory(const std::string& name)
{
    std::vector<Displacement> out;
    const double half_pi = 0.5 * kPi;
    if (name == "corridor_loop") {
        for (int leg = 0; leg < 4; ++leg) {
            detail::straight(out, leg % 2 == 0 ? 125 : 75, 40.0);
            detail::turn(out, 9, 0.0, half_pi);
        }
    } else if (name == "sharp_turns") {
        for (int leg = 0; leg < 4; ++leg) {
            detail::straight(out, leg % 2 == 0 ? 125 : 75, 40.0);
            detail::turn(out, 6, 50.0, half_pi);
        }
    } else if (name == "figure_eight") {
        const int steps = 126;
        const double radius = 800.0;
        const double ds = 2.0 * kPi * radius / steps;
        detail::turn(out, steps, ds, 2.0 * kPi);
        detail::turn(out, steps, ds, -2.0 * kPi);
    } else {
        throw std::invalid_argument("unknown trajectory '" + name + "'");
    }
    return out;
}

}  // namespace scanmatch

#endif  // SCANMATCH_SIMWORLD_HPP
