#ifndef SCANMATCH_SCAN_LOG_HPP
#define SCANMATCH_SCAN_LOG_HPP

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scanmatch/core.hpp"
#include "scanmatch/odometry.hpp"
#include "scanmatch/scan_image.hpp"
#include "scanmatch/simworld.hpp"

namespace scanmatch {

/* One sampling instant. Ground truth is only present in simulated logs. */
struct LogFrame {
    LaserScan scan;
    std::optional<Pose2D> truth;
};

class LogError : public std::runtime_error {
public:
    LogError(std::size_t line, const std::string& what)
        : std::runtime_error("scan log line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/*
 * Line format (whitespace separated):
 *   timestamp_ms N_L N_R r_0 ... r_{B-1} [x y theta]
 * Ranges in mm, -1 for no return; theta in radians.
 */
inline void write_log(std::ostream& os, const std::vector<LogFrame>& frames,
                      const ScanGeometry& geom)
{
    os << "# scanmatch scan log: timestamp_ms N_L N_R " << geom.beam_count
       << " ranges(mm, -1 = no return) [true x y theta]\n";
    os << "# fov_deg " << rad2deg(geom.fov) << " max_range_mm " << geom.max_range << '\n';
    for (const auto& f : frames) {
        os << f.scan.timestamp_ms << ' ' << f.scan.ticks.left << ' ' << f.scan.ticks.right;
        os << std::fixed << std::setprecision(3);
        for (const auto& b : f.scan.beams) {
            if (f.scan.usable(b))
                os << ' ' << b.range;
            else
                os << " -1";
        }
        if (f.truth)
            os << std::setprecision(6) << ' ' << f.truth->x() << ' ' << f.truth->y()
               << ' ' << f.truth->theta();
        os << std::defaultfloat << '\n';
    }
}

inline std::vector<LogFrame> read_log(std::istream& is, const ScanGeometry& geom)
{
    std::vector<LogFrame> frames;
    std::string line;
    std::size_t lineno = 0;
    const std::size_t b = geom.beam_count;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;)
            tok.push_back(std::move(t));
        if (tok.empty())
            continue;
        if (tok.size() != 3 + b && tok.size() != 6 + b)
            throw LogError(lineno, "expected " + std::to_string(3 + b) + " or " +
                                       std::to_string(6 + b) + " fields, got " +
                                       std::to_string(tok.size()));
        auto num = [&](std::size_t i) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok[i], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok[i].size() || !std::isfinite(v))
                throw LogError(lineno, "bad number '" + tok[i] + "'");
            return v;
        };
        auto integer = [&](std::size_t i) {
            const double v = num(i);
            if (v != std::floor(v))
                throw LogError(lineno, "expected an integer, got '" + tok[i] + "'");
            return static_cast<std::int64_t>(v);
        };

        LogFrame f;
        f.scan.timestamp_ms = integer(0);
        f.scan.ticks = {integer(1), integer(2)};
        f.scan.max_range = geom.max_range;
        f.scan.beams.resize(b);
        for (std::size_t i = 0; i < b; ++i) {
            const double r = num(3 + i);
            Beam& beam = f.scan.beams[i];
            beam.bearing = beam_bearing(i, b, geom.fov);
            if (r < 0.0) {
                beam.range = geom.max_range;
                beam.valid = false;
            } else {
                beam.range = r;
                beam.valid = r > 0.0 && r < geom.max_range;
            }
        }
        if (tok.size() == 6 + b)
            f.truth = Pose2D(num(3 + b), num(4 + b), num(5 + b));
        frames.push_back(std::move(f));
    }
    return frames;
}

struct SimulationSpec {
    ScanGeometry geometry{};
    OdometryParams odometry{};
    SlipModel slip{};
    SensorNoise sensor{};
    Pose2D start{};
    std::size_t frames = 500;
    std::int64_t period_ms = 200;
};

/* Sensor noise for frame k gets its own seed derived from the base seed. */
inline std::uint64_t frame_seed(std::uint64_t base, std::uint64_t k)
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (k + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/*
 * Drive the commands (cycled as needed) and record one scan per step.
 * Frame 0 is captured at the start pose with zero ticks.
 */
inline std::vector<LogFrame> simulate_log(const World& world,
                                          const std::vector<Displacement>& commands,
                                          const SimulationSpec& spec)
{
    if (commands.empty() && spec.frames > 1)
        throw std::invalid_argument("simulate_log: empty command list");
    DriveSimulator drive(world, spec.odometry, spec.slip);
    std::vector<LogFrame> out;
    out.reserve(spec.frames);
    Pose2D pose = spec.start;
    for (std::size_t k = 0; k < spec.frames; ++k) {
        WheelTicks ticks{};
        if (k > 0) {
            const auto r = drive.step(pose, commands[(k - 1) % commands.size()]);
            pose = r.true_pose;
            ticks = r.ticks;
        }
        SensorNoise noise = spec.sensor;
        noise.seed = frame_seed(spec.sensor.seed, k);
        LogFrame f;
        f.scan = raycast_scan(world, pose, spec.geometry, noise);
        f.scan.ticks = ticks;
        f.scan.timestamp_ms = static_cast<std::int64_t>(k) * spec.period_ms;
        f.truth = pose;
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace scanmatch

#endif  // SCANMATCH_SCAN_LOG_HPP
