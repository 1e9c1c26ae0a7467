#ifndef SCANMATCH_CONFIG_HPP
#define SCANMATCH_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include "scanmatch/ekf_fusion.hpp"
#include "scanmatch/harris.hpp"
#include "scanmatch/icp_baseline.hpp"
#include "scanmatch/odometry.hpp"
#include "scanmatch/ransac_matcher.hpp"
#include "scanmatch/scan_image.hpp"
#include "scanmatch/simworld.hpp"

namespace scanmatch {

enum class MatcherChoice { ransac, icp };

/*
 * Everything the localization loop needs. Defaults: 50 mm cells,
 * sigma = 5 mm, 181 beams over 180 deg, R = (1 cell, 1 cell, 0.25 deg).
 */
struct PipelineConfig {
    GridConfig grid{};
    HarrisConfig harris{};
    RansacConfig ransac{};
    IcpConfig icp{};
    NoiseModel noise{};
    OdometryParams odometry{};
    ScanGeometry scan{};
    MatcherChoice matcher = MatcherChoice::ransac;
    std::int64_t reference_radius = 160;  // cells around the predicted pose
    int reference_min_hits = 3;           // frames that must mark a map cell
    std::int64_t max_map_extent = 4096;
    double initial_sigma_xy = 0.0;        // mm
    double initial_sigma_theta = 0.0;     // rad
    double innovation_gate = std::numeric_limits<double>::infinity();  // chi-square, 3 dof
    bool map_only_corrected = true;       // skip superimposing odometry-only frames
    // RANSAC prior window: this many predicted standard deviations, but never
    // narrower than the floors below. Infinite sigmas disable the window.
    double prior_sigmas = 3.0;
    double prior_min_rotation = deg2rad(1.0);  // rad
    double prior_min_shift = 2.0;              // cells
    std::uint64_t seed = 1;
};

/* Inputs to the simulator side of the CLI (simulate / sweep). */
struct SimConfig {
    std::string world = "lab_room";
    std::string trajectory = "sharp_turns";
    std::size_t frames = 500;
    double range_sigma = 5.0;
    double eta = 0.0;
    double tick_sigma = 0.002;
    double turn_slip_gain = 0.05;
    std::uint64_t seed = 1;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/* key = value lines; '#' comments; blank lines ignored. */
inline std::map<std::string, std::string> parse_key_values(std::istream& is)
{
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v)
{
    if (v == "inf")
        return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty())
        throw ConfigError("config key '" + key + "': bad number '" + v + "'");
    return d;
}

inline std::int64_t to_int(const std::string& key, const std::string& v)
{
    const double d = to_double(key, v);
    if (d != std::floor(d) || !std::isfinite(d))
        throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<std::int64_t>(d);
}

}  // namespace detail

/*
 * Apply recognised keys; returns the ones it did not know so callers can
 * offer them to another section (or reject them).
 */
inline std::map<std::string, std::string> apply_pipeline_keys(
    PipelineConfig& cfg, std::map<std::string, std::string> kv)
{
    using detail::to_double;
    using detail::to_int;
    double cell = cfg.grid.cell_size(), sigma = cfg.grid.sensor_sigma();
    double D = cfg.odometry.wheel_diameter(), B = cfg.odometry.vehicle_width();
    double n = cfg.odometry.gear_ratio(), re = cfg.odometry.encoder_resolution();
    double r_xy_cells = std::sqrt(cfg.noise.measurement_R(0, 0)) / cell;
    double r_theta_deg = rad2deg(std::sqrt(cfg.noise.measurement_R(2, 2)));

    const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
        setters = {
            {"grid.cell_size", [&](auto& k, auto& v) { cell = to_double(k, v); }},
            {"grid.sigma", [&](auto& k, auto& v) { sigma = to_double(k, v); }},
            {"harris.k", [&](auto& k, auto& v) { cfg.harris.k = to_double(k, v); }},
            {"harris.threshold",
             [&](auto& k, auto& v) { cfg.harris.response_threshold = to_double(k, v); }},
            {"harris.window",
             [&](auto& k, auto& v) { cfg.harris.smoothing_window = static_cast<int>(to_int(k, v)); }},
            {"harris.nms_radius",
             [&](auto& k, auto& v) { cfg.harris.nms_radius = static_cast<int>(to_int(k, v)); }},
            {"ransac.window_w", [&](auto& k, auto& v) { cfg.ransac.window_w = to_double(k, v); }},
            {"ransac.max_nn_dist",
             [&](auto& k, auto& v) { cfg.ransac.max_nn_dist = to_double(k, v); }},
            {"ransac.delta",
             [&](auto& k, auto& v) { cfg.ransac.success_prob_delta = to_double(k, v); }},
            {"ransac.eps",
             [&](auto& k, auto& v) { cfg.ransac.outlier_ratio_eps = to_double(k, v); }},
            {"ransac.rigidity_tol",
             [&](auto& k, auto& v) { cfg.ransac.rigidity_tol = to_double(k, v); }},
            {"ransac.support_tol",
             [&](auto& k, auto& v) { cfg.ransac.support_tol = to_double(k, v); }},
            {"ransac.min_support",
             [&](auto& k, auto& v) { cfg.ransac.min_support = static_cast<int>(to_int(k, v)); }},
            {"ransac.min_iterations",
             [&](auto& k, auto& v) { cfg.ransac.min_iterations = static_cast<int>(to_int(k, v)); }},
            {"ransac.max_iterations",
             [&](auto& k, auto& v) { cfg.ransac.max_iterations = static_cast<int>(to_int(k, v)); }},
            {"icp.max_iterations",
             [&](auto& k, auto& v) { cfg.icp.max_iterations = static_cast<int>(to_int(k, v)); }},
            {"icp.convergence_tol",
             [&](auto& k, auto& v) { cfg.icp.convergence_tol = to_double(k, v); }},
            {"icp.max_pair_dist",
             [&](auto& k, auto& v) { cfg.icp.max_pair_dist = to_double(k, v); }},
            {"ekf.k_s", [&](auto& k, auto& v) { cfg.noise.k_s = to_double(k, v); }},
            {"ekf.k_theta", [&](auto& k, auto& v) { cfg.noise.k_theta = to_double(k, v); }},
            {"ekf.k_drift_deg",
             [&](auto& k, auto& v) { cfg.noise.k_drift = deg2rad(to_double(k, v)); }},
            {"ekf.r_xy_cells", [&](auto& k, auto& v) { r_xy_cells = to_double(k, v); }},
            {"ekf.r_theta_deg", [&](auto& k, auto& v) { r_theta_deg = to_double(k, v); }},
            {"ekf.joseph", [&](auto& k, auto& v) { cfg.noise.joseph_form = to_int(k, v) != 0; }},
            {"ekf.initial_sigma_xy",
             [&](auto& k, auto& v) { cfg.initial_sigma_xy = to_double(k, v); }},
            {"ekf.initial_sigma_theta_deg",
             [&](auto& k, auto& v) { cfg.initial_sigma_theta = deg2rad(to_double(k, v)); }},
            {"ekf.gate", [&](auto& k, auto& v) { cfg.innovation_gate = to_double(k, v); }},
            {"prior.sigmas", [&](auto& k, auto& v) { cfg.prior_sigmas = to_double(k, v); }},
            {"prior.min_rotation_deg",
             [&](auto& k, auto& v) { cfg.prior_min_rotation = deg2rad(to_double(k, v)); }},
            {"prior.min_shift_cells",
             [&](auto& k, auto& v) { cfg.prior_min_shift = to_double(k, v); }},
            {"mapper.only_corrected",
             [&](auto& k, auto& v) { cfg.map_only_corrected = to_int(k, v) != 0; }},
            {"odometry.wheel_diameter", [&](auto& k, auto& v) { D = to_double(k, v); }},
            {"odometry.vehicle_width", [&](auto& k, auto& v) { B = to_double(k, v); }},
            {"odometry.gear_ratio", [&](auto& k, auto& v) { n = to_double(k, v); }},
            {"odometry.encoder_resolution", [&](auto& k, auto& v) { re = to_double(k, v); }},
            {"scan.beams",
             [&](auto& k, auto& v) { cfg.scan.beam_count = static_cast<std::size_t>(to_int(k, v)); }},
            {"scan.fov_deg", [&](auto& k, auto& v) { cfg.scan.fov = deg2rad(to_double(k, v)); }},
            {"scan.max_range", [&](auto& k, auto& v) { cfg.scan.max_range = to_double(k, v); }},
            {"mapper.reference_radius",
             [&](auto& k, auto& v) { cfg.reference_radius = to_int(k, v); }},
            {"mapper.min_hits",
             [&](auto& k, auto& v) { cfg.reference_min_hits = static_cast<int>(to_int(k, v)); }},
            {"mapper.max_extent", [&](auto& k, auto& v) { cfg.max_map_extent = to_int(k, v); }},
            {"matcher",
             [&](auto& k, auto& v) {
                 if (v == "ransac")
                     cfg.matcher = MatcherChoice::ransac;
                 else if (v == "icp")
                     cfg.matcher = MatcherChoice::icp;
                 else
                     throw ConfigError("config key '" + k + "': expected ransac or icp");
             }},
            {"seed", [&](auto& k, auto& v) {
                 cfg.seed = static_cast<std::uint64_t>(to_int(k, v));
                 cfg.ransac.seed = cfg.seed;
             }},
        };

    std::map<std::string, std::string> rest;
    for (const auto& [k, v] : kv) {
        if (auto it = setters.find(k); it != setters.end())
            it->second(k, v);
        else
            rest.emplace(k, v);
    }
    try {
        cfg.grid = GridConfig(cell, sigma);
        cfg.odometry = OdometryParams(D, B, n, re);
        cfg.harris.validate();
        cfg.ransac.validate();
        cfg.icp.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const double rxy = r_xy_cells * cell;
    const double rth = deg2rad(r_theta_deg);
    cfg.noise.measurement_R =
        Eigen::Vector3d(rxy * rxy, rxy * rxy, rth * rth).asDiagonal();
    return rest;
}

inline std::map<std::string, std::string> apply_sim_keys(
    SimConfig& sim, std::map<std::string, std::string> kv)
{
    using detail::to_double;
    using detail::to_int;
    std::map<std::string, std::string> rest;
    for (const auto& [k, v] : kv) {
        if (k == "sim.world")
            sim.world = v;
        else if (k == "sim.trajectory")
            sim.trajectory = v;
        else if (k == "sim.frames")
            sim.frames = static_cast<std::size_t>(to_int(k, v));
        else if (k == "sim.range_sigma")
            sim.range_sigma = to_double(k, v);
        else if (k == "sim.eta")
            sim.eta = to_double(k, v);
        else if (k == "sim.tick_sigma")
            sim.tick_sigma = to_double(k, v);
        else if (k == "sim.turn_slip_gain")
            sim.turn_slip_gain = to_double(k, v);
        else if (k == "sim.seed")
            sim.seed = static_cast<std::uint64_t>(to_int(k, v));
        else
            rest.emplace(k, v);
    }
    return rest;
}

/* Parse a whole config file; unknown keys are an error. */
inline void load_config(std::istream& is, PipelineConfig& cfg, SimConfig& sim)
{
    auto rest = apply_sim_keys(sim, apply_pipeline_keys(cfg, parse_key_values(is)));
    if (!rest.empty())
        throw ConfigError("unknown config key '" + rest.begin()->first + "'");
}

}  // namespace scanmatch

#endif  // SCANMATCH_CONFIG_HPP
