#ifndef SCANMATCH_ICP_BASELINE_HPP
#define SCANMATCH_ICP_BASELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "scanmatch/core.hpp"

namespace scanmatch {

struct IcpConfig {
    int max_iterations = 30;
    double convergence_tol = 1e-3;  // mm of RMS change
    double max_pair_dist = std::numeric_limits<double>::infinity();  // mm

    void validate() const
    {
        if (max_iterations < 1)
            throw std::invalid_argument("IcpConfig: max_iterations must be >= 1");
        if (!(convergence_tol > 0.0) || !(max_pair_dist > 0.0))
            throw std::invalid_argument("IcpConfig: tolerances must be positive");
    }
};

struct IcpResult {
    Transform2D transform;          // maps current points onto the reference
    std::vector<double> rms_history;
    int iterations_used = 0;
    bool converged = false;
    bool degenerate = false;
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
};

/*
 * Uniform hash grid over a fixed point set for nearest-neighbour queries.
 */
class PointGrid {
public:
    PointGrid(std::span<const Point2D> pts, double cell)
        : pts_(pts.begin(), pts.end()), cell_(cell)
    {
        if (pts_.empty())
            return;
        lo_ = hi_ = key_of(pts_[0]);
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            const Key k = key_of(pts_[i]);
            lo_.x = std::min(lo_.x, k.x);
            lo_.y = std::min(lo_.y, k.y);
            hi_.x = std::max(hi_.x, k.x);
            hi_.y = std::max(hi_.y, k.y);
            buckets_[pack(k)].push_back(i);
        }
    }

    /* Index and distance of the closest stored point. */
    std::pair<std::size_t, double> nearest(const Point2D& q) const
    {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        if (pts_.empty())
            return {best, best_d};
        const Key c = key_of(q);
        // rings beyond the stored extent are empty
        const std::int64_t max_ring =
            std::max({std::abs(c.x - lo_.x), std::abs(c.x - hi_.x),
                      std::abs(c.y - lo_.y), std::abs(c.y - hi_.y)});
        for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
            // any point in ring r is at least (r - 1) cells away
            if (ring > 0 && best_d <= static_cast<double>(ring - 1) * cell_)
                break;
            for (std::int64_t dx = -ring; dx <= ring; ++dx) {
                const bool edge = std::abs(dx) == ring;
                const std::int64_t step = edge ? 1 : std::max<std::int64_t>(2 * ring, 1);
                for (std::int64_t dy = -ring; dy <= ring; dy += step) {
                    const auto it = buckets_.find(pack({c.x + dx, c.y + dy}));
                    if (it == buckets_.end())
                        continue;
                    for (std::size_t i : it->second) {
                        const double d = distance(q, pts_[i]);
                        if (d < best_d || (d == best_d && i < best)) {
                            best_d = d;
                            best = i;
                        }
                    }
                }
            }
        }
        return {best, best_d};
    }

    const Point2D& point(std::size_t i) const { return pts_[i]; }

private:
    struct Key {
        std::int64_t x, y;
    };
    Key key_of(const Point2D& p) const
    {
        return {static_cast<std::int64_t>(std::floor(p.x / cell_)),
                static_cast<std::int64_t>(std::floor(p.y / cell_))};
    }
    static std::uint64_t pack(const Key& k)
    {
        return (static_cast<std::uint64_t>(k.x) << 32) ^
               (static_cast<std::uint64_t>(k.y) & 0xffffffffULL);
    }

    std::vector<Point2D> pts_;
    double cell_;
    Key lo_{0, 0}, hi_{0, 0};
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

namespace detail {

struct RigidFit {
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
    bool degenerate = false;
};

/* Least-squares rigid motion taking src onto dst (SVD of cross-covariance). */
inline RigidFit fit_rigid(std::span<const Point2D> src, std::span<const Point2D> dst)
{
    RigidFit fit;
    const double n = static_cast<double>(src.size());
    Eigen::Vector2d cs = Eigen::Vector2d::Zero();
    Eigen::Vector2d cd = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs += Eigen::Vector2d(src[i].x, src[i].y);
        cd += Eigen::Vector2d(dst[i].x, dst[i].y);
    }
    cs /= n;
    cd /= n;
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        h += (Eigen::Vector2d(src[i].x, src[i].y) - cs) *
             (Eigen::Vector2d(dst[i].x, dst[i].y) - cd).transpose();

    Eigen::JacobiSVD<Eigen::Matrix2d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if (svd.singularValues()(0) <= 1e-12 * scale) {
        fit.degenerate = true;
        fit.translation = cd - cs;
        return fit;
    }
    Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
    d(1, 1) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    fit.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    fit.translation = cd - fit.rotation * cs;
    return fit;
}

}  // namespace detail

/*
 * Point-to-point ICP. rms_history[k] is the RMS nearest-neighbour distance
 * at the start of iteration k; the last entry is taken at the final pose.
 */
inline IcpResult icp_align(std::span<const Point2D> ref_pts,
                           std::span<const Point2D> cur_pts, const IcpConfig& cfg)
{
    cfg.validate();
    if (ref_pts.size() < 3 || cur_pts.size() < 3)
        throw std::invalid_argument("icp_align: both clouds need at least 3 points");

    const PointGrid grid(ref_pts, 100.0);
    IcpResult res;
    Eigen::Matrix2d rot = Eigen::Matrix2d::Identity();
    Eigen::Vector2d trans = Eigen::Vector2d::Zero();

    std::vector<Point2D> moved(cur_pts.size());
    std::vector<Point2D> src, dst;
    auto correspond = [&]() {
        src.clear();
        dst.clear();
        double sq = 0.0;
        for (std::size_t i = 0; i < cur_pts.size(); ++i) {
            const Eigen::Vector2d p = rot * Eigen::Vector2d(cur_pts[i].x, cur_pts[i].y) + trans;
            moved[i] = {p.x(), p.y()};
            const auto [j, d] = grid.nearest(moved[i]);
            if (d > cfg.max_pair_dist)
                continue;
            src.push_back(moved[i]);
            dst.push_back(grid.point(j));
            sq += d * d;
        }
        return src.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(src.size()));
    };

    double rms = correspond();
    res.rms_history.push_back(rms);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        if (src.size() < 3)
            break;
        const detail::RigidFit step = detail::fit_rigid(src, dst);
        res.degenerate = res.degenerate || step.degenerate;
        rot = step.rotation * rot;
        trans = step.rotation * trans + step.translation;
        res.iterations_used = it + 1;

        const double next = correspond();
        res.rms_history.push_back(next);
        const double change = std::abs(rms - next);
        rms = next;
        if (change < cfg.convergence_tol) {
            res.converged = true;
            break;
        }
    }
    res.rotation = rot;
    res.transform = Transform2D(std::atan2(rot(1, 0), rot(0, 0)), {trans.x(), trans.y()});
    return res;
}

}  // namespace scanmatch

#endif  // SCANMATCH_ICP_BASELINE_HPP
