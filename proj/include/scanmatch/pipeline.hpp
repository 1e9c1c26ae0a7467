#ifndef SCANMATCH_PIPELINE_HPP
#define SCANMATCH_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "scanmatch/config.hpp"
#include "scanmatch/core.hpp"
#include "scanmatch/ekf_fusion.hpp"
#include "scanmatch/harris.hpp"
#include "scanmatch/icp_baseline.hpp"
#include "scanmatch/mapper.hpp"
#include "scanmatch/ransac_matcher.hpp"
#include "scanmatch/scan_image.hpp"
#include "scanmatch/scan_log.hpp"
#include "scanmatch/simworld.hpp"

namespace scanmatch {

/* Absolute pose error in cells and degrees. */
struct Residual {
    double dx_cells = 0.0;
    double dy_cells = 0.0;
    double dtheta_deg = 0.0;
};

inline Residual residual(const Pose2D& estimate, const Pose2D& truth, double cell)
{
    return {std::abs(estimate.x() - truth.x()) / cell,
            std::abs(estimate.y() - truth.y()) / cell,
            std::abs(rad2deg(wrap_angle(estimate.theta() - truth.theta())))};
}

struct FrameResult {
    std::size_t frame = 0;
    std::int64_t timestamp_ms = 0;
    Pose2D predicted{};
    std::optional<Pose2D> measured;
    Pose2D fused{};
    std::optional<Pose2D> truth;
    std::optional<Residual> residual;  // measured vs truth
    int support = 0;
    int tentative_count = 0;
    double covariance_trace = 0.0;
    bool update_accepted = false;
    double runtime_ms = 0.0;

    // filled only when the ICP side measurement is requested
    std::optional<Pose2D> icp_measured;
    std::optional<Residual> icp_residual;
};

struct MeasurementOutcome {
    std::optional<Pose2D> pose;
    int support = 0;
    int tentative = 0;
};

/*
 * Sequential localizer: predict from ticks, image the scan at the predicted
 * pose, measure against the reference, fuse, and grow the map.
 */
class Localizer {
public:
    explicit Localizer(PipelineConfig cfg) : cfg_(std::move(cfg))
    {
        map_.max_extent = cfg_.max_map_extent;
    }

    /* Returns nothing for the first frame, which only seeds the map. */
    std::optional<FrameResult> process(const LogFrame& f, bool with_icp = false)
    {
        const auto t0 = std::chrono::steady_clock::now();
        if (!initialized_) {
            initialize(f);
            return std::nullopt;
        }
        ++frame_;
        FrameResult res;
        res.frame = frame_;
        res.timestamp_ms = f.scan.timestamp_ms;
        res.truth = f.truth;

        const EkfState predicted = predict(state_, cfg_.odometry, f.scan.ticks, cfg_.noise);
        res.predicted = predicted.pose;
        const GridImage img = scan_to_image(f.scan, predicted.pose, cfg_.grid);
        const std::vector<Point2D> cur_pts = project_scan(f.scan, predicted.pose);

        MeasurementOutcome ransac_m;
        std::optional<Pose2D> icp_m;
        if (cfg_.matcher == MatcherChoice::ransac)
            ransac_m = measure_ransac(img, predicted);
        if (cfg_.matcher == MatcherChoice::icp || with_icp)
            icp_m = measure_icp(cur_pts, predicted.pose);

        if (cfg_.matcher == MatcherChoice::ransac) {
            res.measured = ransac_m.pose;
            res.support = ransac_m.support;
            res.tentative_count = ransac_m.tentative;
        } else {
            res.measured = icp_m;
        }
        if (with_icp) {
            res.icp_measured = icp_m;
            if (icp_m && f.truth)
                res.icp_residual = residual(*icp_m, *f.truth, cfg_.grid.cell_size());
        }

        state_ = predicted;
        if (res.measured) {
            if (f.truth)
                res.residual = residual(*res.measured, *f.truth, cfg_.grid.cell_size());
            if (within_gate(predicted, *res.measured)) {
                const UpdateResult up = update(predicted, *res.measured, cfg_.noise);
                res.update_accepted = up.accepted;
                state_ = up.state;
            }
        }
        res.fused = state_.pose;
        res.covariance_trace = state_.covariance.trace();

        if (!img.empty() && (res.update_accepted || !cfg_.map_only_corrected)) {
            superimpose(map_, img, state_.pose, f.scan.timestamp_ms, res.covariance_trace);
            ++mapped_frames_;
        } else
            map_.trajectory.push_back({f.scan.timestamp_ms, state_.pose, res.covariance_trace});
        prev_points_ = project_scan(f.scan, state_.pose);

        res.runtime_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        return res;
    }

    const GlobalMap& map() const { return map_; }
    const EkfState& state() const { return state_; }

private:
    void initialize(const LogFrame& f)
    {
        state_.pose = Pose2D{};
        const double sxy = cfg_.initial_sigma_xy;
        const double sth = cfg_.initial_sigma_theta;
        state_.covariance = Eigen::Vector3d(sxy * sxy, sxy * sxy, sth * sth).asDiagonal();
        const GridImage img = scan_to_image(f.scan, state_.pose, cfg_.grid);
        if (!img.empty()) {
            superimpose(map_, img, state_.pose, f.scan.timestamp_ms,
                        state_.covariance.trace());
            ++mapped_frames_;
        } else
            map_.trajectory.push_back({f.scan.timestamp_ms, state_.pose,
                                       state_.covariance.trace()});
        prev_points_ = project_scan(f.scan, state_.pose);
        initialized_ = true;
    }

    /* Squared Mahalanobis distance of the innovation against the gate. */
    bool within_gate(const EkfState& predicted, const Pose2D& measured) const
    {
        if (!std::isfinite(cfg_.innovation_gate))
            return true;
        const Eigen::Vector3d v = innovation(predicted.pose, measured);
        const Eigen::Matrix3d S = predicted.covariance + cfg_.noise.measurement_R;
        return v.dot(S.ldlt().solve(v)) <= cfg_.innovation_gate;
    }

    MeasurementOutcome measure_ransac(const GridImage& img, const EkfState& predicted)
    {
        MeasurementOutcome out;
        if (img.empty() || map_.empty())
            return out;
        const auto cur = keypoint_positions(img, detect_keypoints(img, cfg_.harris));
        // a young map cannot have more hits than frames put into it
        const int min_hits = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(cfg_.reference_min_hits), mapped_frames_));
        const auto ref = extract_reference_keypoints(map_, predicted.pose, cfg_.reference_radius,
                                                     cfg_.harris, min_hits);
        const double a = cfg_.grid.cell_size();
        RansacConfig rc = cfg_.ransac;
        rc.seed = frame_seed(cfg_.seed, frame_);
        if (std::isfinite(cfg_.prior_sigmas)) {
            const Eigen::Matrix3d& P = predicted.covariance;
            rc.pivot = predicted.pose.position() * (1.0 / a);
            rc.max_rotation = std::max(cfg_.prior_min_rotation,
                                       cfg_.prior_sigmas * std::sqrt(std::max(P(2, 2), 0.0)));
            rc.max_shift = std::max(cfg_.prior_min_shift,
                                    cfg_.prior_sigmas *
                                        std::sqrt(std::max(P(0, 0) + P(1, 1), 0.0)) / a);
        }
        const RansacResult r = ransac_align(ref, cur, rc);
        out.tentative = static_cast<int>(r.tentative.size());
        if (!r.best)
            return out;
        out.support = r.best->support;
        const Transform2D correction(-r.best->phi_co, r.best->translation() * a);
        out.pose = transform_pose(correction, predicted.pose);
        return out;
    }

    std::optional<Pose2D> measure_icp(const std::vector<Point2D>& cur,
                                      const Pose2D& predicted) const
    {
        if (cur.size() < 3 || prev_points_.size() < 3)
            return std::nullopt;
        const IcpResult r = icp_align(prev_points_, cur, cfg_.icp);
        return transform_pose(r.transform, predicted);
    }

    PipelineConfig cfg_;
    bool initialized_ = false;
    std::size_t frame_ = 0;
    std::size_t mapped_frames_ = 0;
    EkfState state_{};
    GlobalMap map_{};
    std::vector<Point2D> prev_points_;
};

struct PipelineOutput {
    std::vector<TrajectoryEntry> trajectory;
    GlobalMap map;
    std::vector<FrameResult> frames;
};

inline PipelineOutput run_pipeline(const std::vector<LogFrame>& log,
                                   const PipelineConfig& cfg, bool with_icp = false)
{
    Localizer loc(cfg);
    PipelineOutput out;
    for (const auto& f : log)
        if (auto r = loc.process(f, with_icp))
            out.frames.push_back(std::move(*r));
    out.map = loc.map();
    out.trajectory = out.map.trajectory;
    return out;
}

/* ---- statistics ---- */

inline double percentile(std::vector<double> v, double p)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ResidualStats {
    std::size_t count = 0;
    std::size_t failures = 0;
    Residual median{};
    Residual p90{};
};

/* Percentiles over the frames that produced a measurement; the rest are
   counted in `failures`. */
inline ResidualStats summarize(const std::vector<std::optional<Residual>>& rs)
{
    std::vector<double> x, y, t;
    ResidualStats s;
    s.count = rs.size();
    for (const auto& r : rs) {
        if (!r) {
            ++s.failures;
            continue;
        }
        x.push_back(r->dx_cells);
        y.push_back(r->dy_cells);
        t.push_back(r->dtheta_deg);
    }
    s.median = {median(x), median(y), median(t)};
    s.p90 = {percentile(x, 0.9), percentile(y, 0.9), percentile(t, 0.9)};
    return s;
}

/* ---- CSV output ---- */

inline void write_frames_csv(std::ostream& os, const std::vector<FrameResult>& frames)
{
    os << "frame,timestamp_ms,pred_x,pred_y,pred_theta,measured,meas_x,meas_y,"
          "meas_theta,fused_x,fused_y,fused_theta,cov_trace,support,tentative,"
          "res_dx_cells,res_dy_cells,res_dtheta_deg,true_x,true_y,true_theta\n";
    os << std::fixed;
    for (const auto& r : frames) {
        os << std::setprecision(0) << r.frame << ',' << r.timestamp_ms << ','
           << std::setprecision(3) << r.predicted.x() << ',' << r.predicted.y() << ','
           << std::setprecision(6) << r.predicted.theta() << ',' << (r.measured ? 1 : 0)
           << ',';
        if (r.measured)
            os << std::setprecision(3) << r.measured->x() << ',' << r.measured->y() << ','
               << std::setprecision(6) << r.measured->theta() << ',';
        else
            os << ",,,";
        os << std::setprecision(3) << r.fused.x() << ',' << r.fused.y() << ','
           << std::setprecision(6) << r.fused.theta() << ',' << std::setprecision(3)
           << r.covariance_trace << ',' << r.support << ',' << r.tentative_count << ',';
        if (r.residual)
            os << std::setprecision(4) << r.residual->dx_cells << ','
               << r.residual->dy_cells << ',' << r.residual->dtheta_deg;
        else
            os << ",,";
        if (r.truth)
            os << ',' << std::setprecision(3) << r.truth->x() << ',' << r.truth->y() << ','
               << std::setprecision(6) << r.truth->theta();
        else
            os << ",,,";
        os << '\n';
    }
    os << std::defaultfloat;
}

inline void write_trajectory_csv(std::ostream& os,
                                 const std::vector<TrajectoryEntry>& traj)
{
    os << "timestamp_ms,x,y,theta,cov_trace\n" << std::fixed;
    for (const auto& e : traj)
        os << e.timestamp_ms << ',' << std::setprecision(3) << e.pose.x() << ','
           << e.pose.y() << ',' << std::setprecision(6) << e.pose.theta() << ','
           << std::setprecision(3) << e.covariance_trace << '\n';
    os << std::defaultfloat;
}

/* ---- matcher comparison ---- */

inline const char* segment_name(bool turn) { return turn ? "turn" : "straight"; }

struct CompareReport {
    std::vector<FrameResult> frames;
    std::vector<bool> is_turn;  // per frame
    ResidualStats ransac_straight, ransac_turn, icp_straight, icp_turn;
};

/* Frames whose true heading changed by at least this much are turns. */
inline constexpr double kTurnThreshold = 1.0 * kPi / 180.0;

/*
 * Runs the RANSAC pipeline and, at every frame, also measures with ICP
 * from the same predicted pose against the previous scan placed at the
 * previous fused pose.
 */
inline CompareReport compare_matchers(const std::vector<LogFrame>& log, PipelineConfig cfg)
{
    for (const auto& f : log)
        if (!f.truth)
            throw std::invalid_argument("compare: log has no ground truth");
    cfg.matcher = MatcherChoice::ransac;
    CompareReport rep;
    rep.frames = run_pipeline(log, cfg, true).frames;
    std::vector<std::optional<Residual>> rs, rt, is, it;
    for (const auto& fr : rep.frames) {
        const double dth = wrap_angle(log[fr.frame].truth->theta() -
                                      log[fr.frame - 1].truth->theta());
        const bool turn = std::abs(dth) >= kTurnThreshold;
        rep.is_turn.push_back(turn);
        (turn ? rt : rs).push_back(fr.residual);
        (turn ? it : is).push_back(fr.icp_residual);
    }
    rep.ransac_straight = summarize(rs);
    rep.ransac_turn = summarize(rt);
    rep.icp_straight = summarize(is);
    rep.icp_turn = summarize(it);
    return rep;
}

inline void write_compare_csv(std::ostream& os, const CompareReport& rep)
{
    os << "kind,frame,segment,matcher,available,dx_cells,dy_cells,dtheta_deg\n";
    os << std::fixed << std::setprecision(4);
    // summary rows put the segment's frame count in `frame` and the number
    // of measured frames in `available`
    auto row = [&](const std::string& kind, const std::string& frame, const char* seg,
                   const char* matcher, std::size_t available, const Residual& r) {
        const bool ok = available > 0;
        os << kind << ',' << frame << ',' << seg << ',' << matcher << ',' << available
           << ',';
        if (ok)
            os << r.dx_cells << ',' << r.dy_cells << ',' << r.dtheta_deg;
        else
            os << ",,";
        os << '\n';
    };
    for (std::size_t i = 0; i < rep.frames.size(); ++i) {
        const auto& fr = rep.frames[i];
        const char* seg = segment_name(rep.is_turn[i]);
        const std::string idx = std::to_string(fr.frame);
        row("frame", idx, seg, "ransac", fr.residual.has_value(), fr.residual.value_or(Residual{}));
        row("frame", idx, seg, "icp", fr.icp_residual.has_value(),
            fr.icp_residual.value_or(Residual{}));
    }
    auto summary = [&](const ResidualStats& s, const char* seg, const char* matcher) {
        const std::size_t ok = s.count - s.failures;
        row("median", std::to_string(s.count), seg, matcher, ok, s.median);
        row("p90", std::to_string(s.count), seg, matcher, ok, s.p90);
    };
    summary(rep.ransac_straight, "straight", "ransac");
    summary(rep.ransac_turn, "turn", "ransac");
    summary(rep.icp_straight, "straight", "icp");
    summary(rep.icp_turn, "turn", "icp");
    os << std::defaultfloat;
}

/* ---- noise sweep ---- */

struct SweepCell {
    double eta = 0.0;
    std::uint64_t seed = 0;
    ResidualStats stats;
};

inline SimulationSpec simulation_spec(const PipelineConfig& cfg, const SimConfig& sim,
                                      double eta, std::uint64_t seed)
{
    SimulationSpec spec;
    spec.geometry = cfg.scan;
    spec.odometry = cfg.odometry;
    spec.frames = sim.frames;
    spec.sensor = {sim.range_sigma, eta, seed};
    spec.slip = {sim.tick_sigma, sim.turn_slip_gain, frame_seed(seed, 0xD21FEULL)};
    return spec;
}

inline SweepCell run_sweep_cell(const World& world, const std::vector<Displacement>& cmds,
                                const PipelineConfig& cfg, const SimConfig& sim,
                                double eta, std::uint64_t seed)
{
    const auto log = simulate_log(world, cmds, simulation_spec(cfg, sim, eta, seed));
    PipelineConfig c = cfg;
    c.seed = seed;
    const auto out = run_pipeline(log, c);
    std::vector<std::optional<Residual>> rs;
    for (const auto& f : out.frames)
        rs.push_back(f.residual);
    return {eta, seed, summarize(rs)};
}

/*
 * Grid of (eta, seed) runs. Cells are independent and run on a small
 * thread pool; results are stored by index so output order is fixed.
 */
inline std::vector<SweepCell> noise_sweep(const World& world,
                                          const std::vector<Displacement>& cmds,
                                          const std::vector<double>& etas,
                                          const std::vector<std::uint64_t>& seeds,
                                          const PipelineConfig& cfg, const SimConfig& sim,
                                          unsigned threads = 0)
{
    std::vector<SweepCell> cells(etas.size() * seeds.size());
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&]() {
        for (std::size_t i = next++; i < cells.size() && !failed; i = next++) {
            try {
                cells[i] = run_sweep_cell(world, cmds, cfg, sim, etas[i / seeds.size()],
                                          seeds[i % seeds.size()]);
            } catch (...) {
                if (!failed.exchange(true))
                    failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
    return cells;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells)
{
    os << "eta,seed,frames,failures,failure_rate,median_dx_cells,median_dy_cells,"
          "median_dtheta_deg,p90_dx_cells,p90_dy_cells,p90_dtheta_deg\n";
    os << std::fixed;
    for (const auto& c : cells) {
        const auto& s = c.stats;
        const double rate =
            s.count ? static_cast<double>(s.failures) / static_cast<double>(s.count) : 0.0;
        os << std::setprecision(2) << c.eta << ',' << c.seed << ',' << s.count << ','
           << s.failures << ',' << std::setprecision(4) << rate << ',' << s.median.dx_cells
           << ',' << s.median.dy_cells << ',' << s.median.dtheta_deg << ','
           << s.p90.dx_cells << ',' << s.p90.dy_cells << ',' << s.p90.dtheta_deg << '\n';
    }
    os << std::defaultfloat;
}

}  // namespace scanmatch

#endif  // SCANMATCH_PIPELINE_HPP
