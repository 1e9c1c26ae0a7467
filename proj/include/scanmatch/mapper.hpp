#ifndef SCANMATCH_MAPPER_HPP
#define SCANMATCH_MAPPER_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "scanmatch/harris.hpp"
#include "scanmatch/scan_image.hpp"

namespace scanmatch {

struct TrajectoryEntry {
    std::int64_t timestamp_ms = 0;
    Pose2D pose{};
    double covariance_trace = 0.0;
};

/*
 * Global reference image plus the robot path that built it. The image
 * only ever grows; occupied cells are never cleared. `hits` counts, per
 * pixel, how many superimposed frames marked it (saturating).
 */
struct GlobalMap {
    GridImage image;
    std::vector<std::uint16_t> hits;
    std::vector<TrajectoryEntry> trajectory;
    std::int64_t max_extent = 4096;  // cells per side

    bool empty() const { return image.empty(); }
};

namespace detail {

struct CellBox {
    std::int64_t r0 = 0, r1 = -1, c0 = 0, c1 = -1;  // inclusive, global g

    bool valid() const { return r0 <= r1 && c0 <= c1; }
    void add(const CellIndex& g)
    {
        if (!valid()) {
            r0 = r1 = g.row;
            c0 = c1 = g.col;
            return;
        }
        r0 = std::min(r0, g.row);
        r1 = std::max(r1, g.row);
        c0 = std::min(c0, g.col);
        c1 = std::max(c1, g.col);
    }
};

template <typename T>
std::vector<T> regrid(const std::vector<T>& src, std::int64_t rows, std::int64_t cols,
                      std::int64_t new_rows, std::int64_t new_cols, std::int64_t dr,
                      std::int64_t dc)
{
    std::vector<T> out(static_cast<std::size_t>(new_rows * new_cols), T{});
    for (std::int64_t r = 0; r < rows; ++r)
        std::copy_n(src.begin() + r * cols, cols, out.begin() + (r + dr) * new_cols + dc);
    return out;
}

/* Re-home the map onto a larger box; existing pixels keep their cells. */
inline void grow_to(GlobalMap& map, const CellBox& box)
{
    GridImage& img = map.image;
    const std::int64_t rows = box.r1 - box.r0 + 1;
    const std::int64_t cols = box.c1 - box.c0 + 1;
    const std::int64_t dr = img.min_cell.row - box.r0;
    const std::int64_t dc = img.min_cell.col - box.c0;
    img.pixels = regrid(img.pixels, img.rows, img.cols, rows, cols, dr, dc);
    map.hits = regrid(map.hits, img.rows, img.cols, rows, cols, dr, dc);
    img.rows = rows;
    img.cols = cols;
    img.robot_row += dr;
    img.robot_col += dc;
    img.min_cell = {box.r0, box.c0};
}

}  // namespace detail

/*
 * OR the local image into the map after moving it from the pose it was
 * built at (local.origin_pose) to `corrected_pose`. Cell centres are moved
 * rigidly and snapped to the nearest cell. The map is zero-padded on any
 * side the local footprint overruns.
 */
inline void superimpose(GlobalMap& map, const GridImage& local,
                        const Pose2D& corrected_pose, std::int64_t timestamp_ms = 0,
                        double covariance_trace = 0.0)
{
    const double a = local.cell_size;
    const Transform2D move =
        corrected_pose.as_transform() * local.origin_pose.as_transform().inverse();
    auto to_global = [&](std::int64_t r, std::int64_t c) {
        const Point2D lat = local.lattice_at(static_cast<double>(r),
                                             static_cast<double>(c));
        const Point2D p = move.apply(lat * a);
        return CellIndex{cell_of(p.x, a), cell_of(p.y, a)};
    };

    std::vector<CellIndex> hits;
    detail::CellBox box;
    if (!map.empty()) {
        box.add(map.image.min_cell);
        box.add(map.image.cell_at(map.image.rows - 1, map.image.cols - 1));
    }
    const CellIndex robot{cell_of(corrected_pose.x(), a), cell_of(corrected_pose.y(), a)};
    box.add(robot);
    if (!local.empty()) {
        box.add(to_global(0, 0));
        box.add(to_global(local.rows - 1, 0));
        box.add(to_global(0, local.cols - 1));
        box.add(to_global(local.rows - 1, local.cols - 1));
        for (std::int64_t r = 0; r < local.rows; ++r)
            for (std::int64_t c = 0; c < local.cols; ++c)
                if (local.at(r, c) == kOccupied) {
                    hits.push_back(to_global(r, c));
                    box.add(hits.back());
                }
    }
    if (box.r1 - box.r0 + 1 > map.max_extent || box.c1 - box.c0 + 1 > map.max_extent)
        throw std::length_error("superimpose: map would exceed its maximum extent");

    GridImage& img = map.image;
    if (img.empty()) {
        img = GridImage{};
        img.cell_size = a;
        img.min_cell = {box.r0, box.c0};
        img.rows = box.r1 - box.r0 + 1;
        img.cols = box.c1 - box.c0 + 1;
        img.pixels.assign(static_cast<std::size_t>(img.rows * img.cols), kEmpty);
        map.hits.assign(img.pixels.size(), 0);
    } else if (box.r0 < img.min_cell.row || box.c0 < img.min_cell.col ||
               box.r1 > img.min_cell.row + img.rows - 1 ||
               box.c1 > img.min_cell.col + img.cols - 1) {
        detail::grow_to(map, box);
    }
    // several local pixels can land on one cell; count it once per frame
    std::sort(hits.begin(), hits.end(), [](const CellIndex& l, const CellIndex& r) {
        return l.row != r.row ? l.row < r.row : l.col < r.col;
    });
    hits.erase(std::unique(hits.begin(), hits.end(),
                           [](const CellIndex& l, const CellIndex& r) {
                               return l.row == r.row && l.col == r.col;
                           }),
               hits.end());
    for (const auto& g : hits) {
        const std::int64_t r = g.row - img.min_cell.row;
        const std::int64_t c = g.col - img.min_cell.col;
        img.at(r, c) = kOccupied;
        auto& n = map.hits[static_cast<std::size_t>(r * img.cols + c)];
        if (n < std::numeric_limits<std::uint16_t>::max())
            ++n;
    }
    img.robot_row = robot.row - img.min_cell.row;
    img.robot_col = robot.col - img.min_cell.col;
    img.origin_pose = corrected_pose;
    map.trajectory.push_back({timestamp_ms, corrected_pose, covariance_trace});
}

inline GlobalMap superimposed(GlobalMap map, const GridImage& local,
                              const Pose2D& corrected_pose)
{
    superimpose(map, local, corrected_pose);
    return map;
}

/*
 * Harris keypoints of the map inside a square window of `radius` cells
 * around the cell of `around`, as global lattice coordinates. With
 * min_hits > 1 only pixels marked by at least that many frames count as
 * occupied.
 */
inline std::vector<Point2D> extract_reference_keypoints(const GlobalMap& map,
                                                        const Pose2D& around,
                                                        std::int64_t radius,
                                                        const HarrisConfig& cfg,
                                                        int min_hits = 1)
{
    if (map.empty())
        throw std::invalid_argument("extract_reference_keypoints: empty map");
    const GridImage& img = map.image;
    const double a = img.cell_size;
    const std::int64_t rr = cell_of(around.x(), a) - img.min_cell.row;
    const std::int64_t rc = cell_of(around.y(), a) - img.min_cell.col;
    const PixelRect roi{rr - radius, rr + radius + 1, rc - radius, rc + radius + 1};
    if (min_hits <= 1)
        return keypoint_positions(img, detect_keypoints(img, cfg, roi));

    // Threshold only the part of the map that can influence the window.
    const PixelRect reach = roi.grown(cfg.influence_radius() + cfg.nms_radius);
    const PixelRect win{std::max<std::int64_t>(reach.row0, 0),
                        std::min(reach.row1, img.rows),
                        std::max<std::int64_t>(reach.col0, 0),
                        std::min(reach.col1, img.cols)};
    if (win.rows() <= 0 || win.cols() <= 0)
        return {};
    GridImage sub;
    sub.rows = win.rows();
    sub.cols = win.cols();
    sub.cell_size = a;
    sub.min_cell = {img.min_cell.row + win.row0, img.min_cell.col + win.col0};
    sub.pixels.resize(static_cast<std::size_t>(sub.rows * sub.cols));
    for (std::int64_t r = 0; r < sub.rows; ++r)
        for (std::int64_t c = 0; c < sub.cols; ++c) {
            const auto n = map.hits[static_cast<std::size_t>((r + win.row0) * img.cols +
                                                             c + win.col0)];
            sub.pixels[static_cast<std::size_t>(r * sub.cols + c)] =
                n >= min_hits ? kOccupied : kEmpty;
        }
    const PixelRect sub_roi{roi.row0 - win.row0, roi.row1 - win.row0,
                            roi.col0 - win.col0, roi.col1 - win.col0};
    return keypoint_positions(sub, detect_keypoints(sub, cfg, sub_roi));
}

/* Plain-text sidecar describing how to place the map's pixels. */
inline void write_map_header(std::ostream& os, const GlobalMap& map)
{
    const auto& img = map.image;
    os << "# scanmatch global map\n";
    os << "cell_size_mm " << img.cell_size << '\n';
    os << "rows " << img.rows << '\n';
    os << "cols " << img.cols << '\n';
    os << "min_cell_row " << img.min_cell.row << '\n';
    os << "min_cell_col " << img.min_cell.col << '\n';
    os << "robot_cell " << img.robot_row << ' ' << img.robot_col << '\n';
    os << "origin_pose " << img.origin_pose.x() << ' ' << img.origin_pose.y() << ' '
       << img.origin_pose.theta() << '\n';
    os << "poses " << map.trajectory.size() << '\n';
}

}  // namespace scanmatch

#endif  // SCANMATCH_MAPPER_HPP
