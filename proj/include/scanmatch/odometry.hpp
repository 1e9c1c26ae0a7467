#ifndef SCANMATCH_ODOMETRY_HPP
#define SCANMATCH_ODOMETRY_HPP

#include <cstdint>
#include <stdexcept>

#include "scanmatch/core.hpp"

namespace scanmatch {

/*
 * Differential-drive geometry. Defaults describe a Pioneer-class base:
 * 195 mm wheels, 330 mm track, 38.3:1 gearing, 500 pulse encoders.
 */
class OdometryParams {
public:
    OdometryParams() = default;
    OdometryParams(double wheel_diameter, double vehicle_width,
                   double gear_ratio, double encoder_resolution)
        : wheel_diameter_(wheel_diameter),
          vehicle_width_(vehicle_width),
          gear_ratio_(gear_ratio),
          encoder_resolution_(encoder_resolution)
    {
        if (!(wheel_diameter > 0.0) || !(vehicle_width > 0.0) ||
            !(gear_ratio > 0.0) || !(encoder_resolution > 0.0))
            throw std::invalid_argument(
                "OdometryParams: all parameters must be strictly positive");
    }

    double wheel_diameter() const { return wheel_diameter_; }
    double vehicle_width() const { return vehicle_width_; }
    double gear_ratio() const { return gear_ratio_; }
    double encoder_resolution() const { return encoder_resolution_; }

    /* Travel per summed tick: pi * D / (2 * n * r_e), in mm */
    double mm_per_tick() const
    {
        return kPi * wheel_diameter_ / (2.0 * gear_ratio_ * encoder_resolution_);
    }

private:
    double wheel_diameter_ = 195.0;
    double vehicle_width_ = 330.0;
    double gear_ratio_ = 38.3;
    double encoder_resolution_ = 500.0;
};

/* Encoder increments accumulated over one sampling interval. */
struct WheelTicks {
    std::int64_t left = 0;
    std::int64_t right = 0;

    bool operator==(const WheelTicks&) const = default;
};

struct Displacement {
    double distance = 0.0;  // mm
    double rotation = 0.0;  // rad, not wrapped
};

inline Displacement displacement(const OdometryParams& params,
                                 const WheelTicks& ticks)
{
    const double k = params.mm_per_tick();
    const auto nl = static_cast<double>(ticks.left);
    const auto nr = static_cast<double>(ticks.right);
    return {k * (nl + nr), k * (nl - nr) / params.vehicle_width()};
}

/* Heading is advanced first; the new heading drives the position step. */
inline Pose2D predict_pose(const Pose2D& pose, const Displacement& d)
{
    const double theta = wrap_angle(pose.theta() + d.rotation);
    return {pose.x() + d.distance * std::cos(theta),
            pose.y() + d.distance * std::sin(theta), theta};
}

inline Pose2D predict_pose(const Pose2D& pose, const OdometryParams& params,
                           const WheelTicks& ticks)
{
    return predict_pose(pose, displacement(params, ticks));
}

/*
 * Real-valued wheel ticks that reproduce a displacement exactly, i.e. the
 * inverse of displacement(). Used by the simulator.
 */
struct FractionalTicks {
    double left = 0.0;
    double right = 0.0;
};

inline FractionalTicks ticks_for(const OdometryParams& params,
                                 const Displacement& d)
{
    const double k = params.mm_per_tick();
    const double sum = d.distance / k;
    const double diff = d.rotation * params.vehicle_width() / k;
    return {0.5 * (sum + diff), 0.5 * (sum - diff)};
}

}  // namespace scanmatch

#endif  // SCANMATCH_ODOMETRY_HPP
