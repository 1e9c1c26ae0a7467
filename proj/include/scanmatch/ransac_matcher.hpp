#ifndef SCANMATCH_RANSAC_MATCHER_HPP
#define SCANMATCH_RANSAC_MATCHER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "scanmatch/core.hpp"

namespace scanmatch {

/* Tentative correspondence; both points in global lattice cells. */
struct MatchPair {
    Point2D ref_point;
    Point2D cur_point;

    bool operator==(const MatchPair&) const = default;
};

struct RansacConfig {
    double window_w = 3.0;               // cells
    double max_nn_dist = std::numeric_limits<double>::infinity();  // cells
    double success_prob_delta = 0.99;
    double outlier_ratio_eps = 0.8;      // initial guess, refined online
    int sample_size_j = 2;
    double rigidity_tol = 1.0;           // cells
    double support_tol = 1.0;            // cells
    int min_support = 4;
    int min_iterations = 3000;
    int max_iterations = 20000;
    std::uint64_t seed = 1;

    // Optional prior window: hypotheses that rotate by more than max_rotation
    // or move the pivot (usually the predicted robot cell) by more than
    // max_shift cells are not scored.
    double max_rotation = std::numeric_limits<double>::infinity();  // rad
    double max_shift = std::numeric_limits<double>::infinity();     // cells
    Point2D pivot{};

    void validate() const
    {
        if (!(window_w >= 0.0))
            throw std::invalid_argument("RansacConfig: window_w must be >= 0");
        if (!(success_prob_delta > 0.0 && success_prob_delta < 1.0))
            throw std::invalid_argument("RansacConfig: delta must lie in (0, 1)");
        if (!(outlier_ratio_eps >= 0.0 && outlier_ratio_eps < 1.0))
            throw std::invalid_argument("RansacConfig: eps must lie in [0, 1)");
        if (sample_size_j != 2)
            throw std::invalid_argument("RansacConfig: sample size must be 2");
        if (!(rigidity_tol > 0.0) || !(support_tol > 0.0))
            throw std::invalid_argument("RansacConfig: tolerances must be positive");
        if (min_support < 0 || max_iterations < 1 || min_iterations < 0)
            throw std::invalid_argument("RansacConfig: bad iteration/support limits");
        if (!(max_rotation > 0.0) || !(max_shift > 0.0))
            throw std::invalid_argument("RansacConfig: prior window must be positive");
    }
};

/*
 * Alignment (X_co, Y_co, phi_co): a current point p corresponds to the
 * reference point (X_co, Y_co) + R(-phi_co) p.
 */
struct PoseHypothesis {
    double x_co = 0.0;
    double y_co = 0.0;
    double phi_co = 0.0;
    int support = 0;
    double mean_deviation = 0.0;
    std::vector<MatchPair> inliers;

    Point2D translation() const { return {x_co, y_co}; }

    /* Maps current-frame points onto the reference. */
    Transform2D cur_to_ref() const { return {-phi_co, translation()}; }
};

/*
 * For every reference keypoint take its nearest current keypoint, then
 * pair the reference with every current keypoint in the +-w box around
 * that neighbour. One reference point may get several partners.
 */
inline std::vector<MatchPair> tentative_matches(
    std::span<const Point2D> ref_kps, std::span<const Point2D> cur_kps, double w,
    double max_nn_dist = std::numeric_limits<double>::infinity())
{
    std::vector<MatchPair> out;
    if (ref_kps.empty() || cur_kps.empty())
        return out;
    for (const auto& r : ref_kps) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cur_kps.size(); ++i) {
            const double d = distance(r, cur_kps[i]);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best_d > max_nn_dist)
            continue;
        const Point2D& nn = cur_kps[best];
        for (const auto& c : cur_kps)
            if (std::abs(c.x - nn.x) <= w && std::abs(c.y - nn.y) <= w)
                out.push_back({r, c});
    }
    return out;
}

/* Two-match rigid hypothesis, or nothing if the pair is not rigid. */
inline std::optional<PoseHypothesis> pose_from_two_matches(const MatchPair& m1,
                                                           const MatchPair& m2,
                                                           double rigidity_tol)
{
    const double a = m1.cur_point.x - m2.cur_point.x;
    const double b = m1.cur_point.y - m2.cur_point.y;
    const double c = m1.ref_point.x - m2.ref_point.x;
    const double d = m1.ref_point.y - m2.ref_point.y;
    const double cur_len = std::hypot(a, b);
    const double ref_len = std::hypot(c, d);
    if (cur_len == 0.0 || ref_len == 0.0)
        return std::nullopt;
    if (std::abs(cur_len - ref_len) > rigidity_tol)
        return std::nullopt;

    PoseHypothesis h;
    h.phi_co = wrap_angle(std::atan2(b * c - a * d, a * c + b * d));
    const Point2D t1 = m1.ref_point - rotate(m1.cur_point, -h.phi_co);
    const Point2D t2 = m2.ref_point - rotate(m2.cur_point, -h.phi_co);
    h.x_co = 0.5 * (t1.x + t2.x);
    h.y_co = 0.5 * (t1.y + t2.y);
    return h;
}

/*
 * Deviation of one match under a hypothesis: the reference point is mapped
 * into the current frame, R(phi)(ref - t), and compared to the current
 * point. Rotation preserves length, so this equals the distance between
 * the reference point and the mapped current point.
 */
inline double match_deviation(const PoseHypothesis& hyp, const MatchPair& m)
{
    const Point2D back = rotate(m.ref_point - hyp.translation(), hyp.phi_co);
    return distance(back, m.cur_point);
}

struct SupportResult {
    int support = 0;
    double mean_deviation = 0.0;
    std::vector<MatchPair> inliers;
};

namespace detail {

/* Support count and mean deviation; inliers are appended when a sink is given. */
inline SupportResult support_of(const PoseHypothesis& hyp, std::span<const MatchPair> matches,
                                double tol, std::vector<MatchPair>* sink)
{
    SupportResult out;
    const double c = std::cos(hyp.phi_co);
    const double s = std::sin(hyp.phi_co);
    double sum = 0.0;
    for (const auto& m : matches) {
        const double rx = m.ref_point.x - hyp.x_co;
        const double ry = m.ref_point.y - hyp.y_co;
        const double dev = std::hypot(c * rx - s * ry - m.cur_point.x,
                                      s * rx + c * ry - m.cur_point.y);
        if (dev <= tol) {
            ++out.support;
            sum += dev;
            if (sink)
                sink->push_back(m);
        }
    }
    out.mean_deviation = out.support > 0 ? sum / out.support : 0.0;
    return out;
}

}  // namespace detail

inline SupportResult count_support(const PoseHypothesis& hyp,
                                   std::span<const MatchPair> matches, double tol)
{
    SupportResult out;
    const SupportResult stats = detail::support_of(hyp, matches, tol, &out.inliers);
    out.support = stats.support;
    out.mean_deviation = stats.mean_deviation;
    return out;
}

/* Smallest n with 1 - (1 - (1 - eps)^j)^n >= delta, capped at max_n. */
inline int required_iterations(double delta, double eps, int j,
                               int max_n = std::numeric_limits<int>::max())
{
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("required_iterations: delta must lie in (0, 1)");
    if (!(eps >= 0.0 && eps < 1.0))
        throw std::invalid_argument("required_iterations: eps must lie in [0, 1)");
    if (j < 1)
        throw std::invalid_argument("required_iterations: j must be >= 1");
    const double good = std::pow(1.0 - eps, j);  // P(clean sample)
    if (good >= 1.0)
        return 1;
    const double miss = 1.0 - good;
    if (!(good > 0.0) || !(miss < 1.0))
        throw std::domain_error("required_iterations: no clean sample possible");
    const double target = 1.0 - delta;
    const double est = std::ceil(std::log(target) / std::log(miss));
    if (!(est < static_cast<double>(max_n)))
        return max_n;
    auto n = std::max(1, static_cast<int>(est));
    // guard the ceil against rounding on either side
    while (n > 1 && std::pow(miss, n - 1) <= target)
        --n;
    while (std::pow(miss, n) > target && n < max_n)
        ++n;
    return n;
}

struct RansacResult {
    std::optional<PoseHypothesis> best;
    std::vector<MatchPair> tentative;
    int iterations = 0;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/* The two distinct match indices drawn in round k; depends only on (seed, k). */
inline std::pair<std::size_t, std::size_t> round_sample(std::uint64_t seed, std::uint64_t k,
                                                        std::size_t m)
{
    const std::uint64_t h = mix64(seed ^ mix64(k));
    const auto lo = static_cast<std::uint64_t>(static_cast<std::uint32_t>(h));
    const auto hi = h >> 32;
    const auto i1 = static_cast<std::size_t>((lo * m) >> 32);
    const auto step = static_cast<std::size_t>((hi * (m - 1)) >> 32);
    return {i1, (i1 + 1 + step) % m};
}

inline bool admissible(const PoseHypothesis& h, const RansacConfig& cfg)
{
    if (std::abs(h.phi_co) > cfg.max_rotation)
        return false;
    if (std::isinf(cfg.max_shift))
        return true;
    const Point2D moved = h.cur_to_ref().apply(cfg.pivot);
    return distance(moved, cfg.pivot) <= cfg.max_shift;
}

inline bool better(const SupportResult& a, const SupportResult& b)
{
    if (a.support != b.support)
        return a.support > b.support;
    return a.mean_deviation < b.mean_deviation;
}

}  // namespace detail

/*
 * Hypothesize-and-verify over random pairs of tentative matches. The pair
 * drawn in round k is a hash of (seed, k), so the outcome does not depend
 * on evaluation order.
 */
inline RansacResult ransac_on_matches(std::vector<MatchPair> matches,
                                      const RansacConfig& cfg)
{
    cfg.validate();
    RansacResult out;
    out.tentative = std::move(matches);
    const auto& ms = out.tentative;
    const std::size_t m = ms.size();
    if (m < 2)
        return out;

    int budget = std::max(cfg.min_iterations,
                          required_iterations(cfg.success_prob_delta,
                                              cfg.outlier_ratio_eps,
                                              cfg.sample_size_j, cfg.max_iterations));
    budget = std::min(budget, cfg.max_iterations);

    std::optional<PoseHypothesis> best;
    SupportResult best_support;
    int k = 0;
    for (; k < budget; ++k) {
        const auto [i1, i2] = detail::round_sample(cfg.seed, static_cast<std::uint64_t>(k), m);

        auto hyp = pose_from_two_matches(ms[i1], ms[i2], cfg.rigidity_tol);
        if (!hyp || !detail::admissible(*hyp, cfg))
            continue;
        const SupportResult sup = detail::support_of(*hyp, ms, cfg.support_tol, nullptr);
        if (!best || detail::better(sup, best_support)) {
            hyp->support = sup.support;
            hyp->mean_deviation = sup.mean_deviation;
            best = std::move(hyp);
            best_support = sup;

            const double eps = 1.0 - static_cast<double>(best_support.support) /
                                         static_cast<double>(m);
            if (eps < 1.0) {
                const int need = std::max(
                    cfg.min_iterations,
                    required_iterations(cfg.success_prob_delta, eps,
                                        cfg.sample_size_j, cfg.max_iterations));
                budget = std::min(budget, need);
            }
        }
    }
    out.iterations = k;

    if (best && best->support >= cfg.min_support) {
        best->inliers = count_support(*best, ms, cfg.support_tol).inliers;
        out.best = std::move(best);
    }
    return out;
}

inline RansacResult ransac_align(std::span<const Point2D> ref_kps,
                                 std::span<const Point2D> cur_kps,
                                 const RansacConfig& cfg)
{
    return ransac_on_matches(
        tentative_matches(ref_kps, cur_kps, cfg.window_w, cfg.max_nn_dist), cfg);
}

}  // namespace scanmatch

#endif  // SCANMATCH_RANSAC_MATCHER_HPP
