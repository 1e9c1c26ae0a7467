#ifndef SCANMATCH_SCAN_IMAGE_HPP
#define SCANMATCH_SCAN_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scanmatch/core.hpp"
#include "scanmatch/odometry.hpp"

namespace scanmatch {

inline constexpr std::uint8_t kOccupied = 255;
inline constexpr std::uint8_t kEmpty = 0;

struct Beam {
    double range = 0.0;    // mm
    double bearing = 0.0;  // rad, sensor frame
    bool valid = true;     // false for no-return
};

/*
 * One laser sweep with the wheel ticks accumulated since the previous one.
 */
struct LaserScan {
    std::vector<Beam> beams;
    double max_range = 8000.0;
    WheelTicks ticks{};
    std::int64_t timestamp_ms = 0;

    std::size_t beam_count() const { return beams.size(); }

    /* A beam contributes a point only with 0 < d < max_range. */
    bool usable(const Beam& b) const
    {
        return b.valid && std::isfinite(b.range) && b.range > 0.0 &&
               b.range < max_range;
    }

    void validate() const
    {
        if (!(max_range > 0.0))
            throw std::invalid_argument("LaserScan: max_range must be positive");
        for (std::size_t i = 1; i < beams.size(); ++i)
            if (!(beams[i].bearing > beams[i - 1].bearing))
                throw std::invalid_argument(
                    "LaserScan: bearings must be strictly increasing");
    }
};

/* Bearing of beam i for a sweep of `count` beams over `fov`, centred ahead. */
inline double beam_bearing(std::size_t i, std::size_t count, double fov = kPi)
{
    if (count < 2)
        return 0.0;
    return -0.5 * fov + static_cast<double>(i) * fov /
                            static_cast<double>(count - 1);
}

class GridConfig {
public:
    GridConfig() = default;
    GridConfig(double cell_size, double sensor_sigma)
        : cell_size_(cell_size), sensor_sigma_(sensor_sigma)
    {
        if (!(cell_size > 0.0))
            throw std::invalid_argument("GridConfig: cell size must be positive");
        if (!(sensor_sigma >= 0.0) || !(sensor_sigma < 0.5 * cell_size))
            throw std::invalid_argument(
                "GridConfig: sigma must satisfy 0 <= sigma < a/2");
    }

    double cell_size() const { return cell_size_; }
    double sensor_sigma() const { return sensor_sigma_; }

private:
    double cell_size_ = 50.0;
    double sensor_sigma_ = 5.0;
};

/* 1-based cell indices; cell g is centred on (g - 1) * a. */
struct CellIndex {
    std::int64_t row = 0;  // g_r, from x
    std::int64_t col = 0;  // g_c, from y

    bool operator==(const CellIndex&) const = default;
};

inline std::int64_t cell_of(double v, double a)
{
    // cell g spans ((g - 1) a - a/2, (g - 1) a + a/2]
    return static_cast<std::int64_t>(std::ceil((v - 0.5 * a) / a)) + 1;
}

inline CellIndex cell_index(const Point2D& p, const GridConfig& cfg)
{
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw std::invalid_argument("cell_index: non-finite point");
    return {cell_of(p.x, cfg.cell_size()), cell_of(p.y, cfg.cell_size())};
}

/* True iff v lies in the sigma-shrunk window of cell g. */
inline bool inside_shrunk_window(double v, std::int64_t g, const GridConfig& cfg)
{
    const double a = cfg.cell_size();
    const double s = cfg.sensor_sigma();
    const double centre = static_cast<double>(g - 1) * a;
    return centre - 0.5 * a + s < v && v <= centre + 0.5 * a - s;
}

/*
 * Grey occupancy image on the global cell lattice. Pixel (r, c) holds cell
 * (min_cell.row + r, min_cell.col + c). Row 0 is the minimum g_r.
 */
struct GridImage {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    CellIndex min_cell{};
    std::int64_t robot_row = 0;  // Robot_CenX
    std::int64_t robot_col = 0;  // Robot_CenY
    Pose2D origin_pose{};
    double cell_size = 50.0;
    std::vector<std::uint8_t> pixels;

    bool empty() const { return rows == 0 || cols == 0; }

    std::uint8_t at(std::int64_t r, std::int64_t c) const
    {
        return pixels[static_cast<std::size_t>(r * cols + c)];
    }
    std::uint8_t& at(std::int64_t r, std::int64_t c)
    {
        return pixels[static_cast<std::size_t>(r * cols + c)];
    }

    bool contains(std::int64_t r, std::int64_t c) const
    {
        return r >= 0 && r < rows && c >= 0 && c < cols;
    }

    CellIndex cell_at(std::int64_t r, std::int64_t c) const
    {
        return {min_cell.row + r, min_cell.col + c};
    }

    /* Lattice coordinate in cells, (g - 1); multiply by a for mm. */
    Point2D lattice_at(double r, double c) const
    {
        return {static_cast<double>(min_cell.row - 1) + r,
                static_cast<double>(min_cell.col - 1) + c};
    }

    CellIndex robot_cell() const { return cell_at(robot_row, robot_col); }

    std::size_t occupied_count() const
    {
        return static_cast<std::size_t>(
            std::count(pixels.begin(), pixels.end(), kOccupied));
    }
};

/*
 * Polar to Cartesian: the sensor sits at base + (dx, dy) with heading
 * base.theta + increment rotation. The increment translation is global.
 */
inline std::vector<Point2D> project_scan(const LaserScan& scan,
                                         const Pose2D& base,
                                         const Transform2D& increment)
{
    const double xs = base.x() + increment.translation().x;
    const double ys = base.y() + increment.translation().y;
    const double phi = base.theta() + increment.rotation();
    std::vector<Point2D> out;
    out.reserve(scan.beams.size());
    for (const auto& b : scan.beams) {
        if (!scan.usable(b))
            continue;
        out.push_back({xs + b.range * std::cos(b.bearing + phi),
                       ys + b.range * std::sin(b.bearing + phi)});
    }
    return out;
}

inline std::vector<Point2D> project_scan(const LaserScan& scan,
                                         const Pose2D& pose)
{
    return project_scan(scan, pose, Transform2D::identity());
}

/*
 * Build the occupancy image. A cell is 255 iff some point lies strictly
 * inside its sigma-shrunk window on both axes; points in the boundary band
 * mark nothing. Extents cover every point's cell and the robot's cell.
 */
inline GridImage rasterize(std::span<const Point2D> points, const GridConfig& cfg,
                           const Point2D& robot_position)
{
    if (points.empty())
        throw std::invalid_argument("rasterize: empty point list");

    const CellIndex robot = cell_index(robot_position, cfg);
    std::vector<CellIndex> cells;
    cells.reserve(points.size());
    CellIndex lo = robot;
    CellIndex hi = robot;
    for (const auto& p : points) {
        const CellIndex g = cell_index(p, cfg);
        cells.push_back(g);
        lo.row = std::min(lo.row, g.row);
        lo.col = std::min(lo.col, g.col);
        hi.row = std::max(hi.row, g.row);
        hi.col = std::max(hi.col, g.col);
    }

    GridImage img;
    img.rows = hi.row - lo.row + 1;
    img.cols = hi.col - lo.col + 1;
    img.min_cell = lo;
    img.robot_row = robot.row - lo.row;
    img.robot_col = robot.col - lo.col;
    img.origin_pose = Pose2D(robot_position, 0.0);
    img.cell_size = cfg.cell_size();
    img.pixels.assign(static_cast<std::size_t>(img.rows * img.cols), kEmpty);

    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& g = cells[i];
        if (inside_shrunk_window(points[i].x, g.row, cfg) &&
            inside_shrunk_window(points[i].y, g.col, cfg))
            img.at(g.row - lo.row, g.col - lo.col) = kOccupied;
    }
    return img;
}

/* Project at `pose` and rasterize; the image remembers the pose. */
inline GridImage scan_to_image(const LaserScan& scan, const Pose2D& pose,
                               const GridConfig& cfg)
{
    const auto pts = project_scan(scan, pose);
    if (pts.empty())
        return {};
    GridImage img = rasterize(pts, cfg, pose.position());
    img.origin_pose = pose;
    return img;
}

/* Binary portable greymap, maxval 255. */
inline void write_pgm(std::ostream& os, std::int64_t rows, std::int64_t cols,
                      std::span<const std::uint8_t> pixels)
{
    os << "P5\n" << cols << ' ' << rows << "\n255\n";
    os.write(reinterpret_cast<const char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
}

inline void write_pgm(std::ostream& os, const GridImage& img)
{
    write_pgm(os, img.rows, img.cols, img.pixels);
}

}  // namespace scanmatch

#endif  // SCANMATCH_SCAN_IMAGE_HPP
