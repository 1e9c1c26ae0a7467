#ifndef SCANMATCH_CORE_HPP
#define SCANMATCH_CORE_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace scanmatch {

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/* Reduce an angle to (-pi, pi]. */
inline double wrap_angle(double theta)
{
    if (!std::isfinite(theta))
        throw std::invalid_argument("wrap_angle: non-finite angle");
    double r = std::remainder(theta, 2.0 * kPi);
    if (r <= -kPi)
        r += 2.0 * kPi;
    return r;
}

/* Planar point, millimetres unless stated otherwise (keypoints use cells) */
struct Point2D {
    double x = 0.0;
    double y = 0.0;

    constexpr Point2D() = default;
    constexpr Point2D(double x_, double y_) : x(x_), y(y_) {}

    Point2D operator+(const Point2D& o) const { return {x + o.x, y + o.y}; }
    Point2D operator-(const Point2D& o) const { return {x - o.x, y - o.y}; }
    Point2D operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Point2D&) const = default;

    double norm() const { return std::hypot(x, y); }
};

inline double distance(const Point2D& a, const Point2D& b)
{
    return (a - b).norm();
}

/* Rotate a vector by `angle` radians (counter-clockwise). */
inline Point2D rotate(const Point2D& p, double angle)
{
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

/*
 * Rigid motion p -> R(rotation) * p + translation.
 */
class Transform2D {
public:
    Transform2D() = default;
    Transform2D(double rotation, Point2D translation)
        : rotation_(rotation), translation_(translation)
    {
        if (!std::isfinite(rotation) || !std::isfinite(translation.x) ||
            !std::isfinite(translation.y))
            throw std::invalid_argument("Transform2D: non-finite component");
    }

    static Transform2D identity() { return {}; }

    double rotation() const { return rotation_; }
    const Point2D& translation() const { return translation_; }

    Point2D apply(const Point2D& p) const
    {
        return rotate(p, rotation_) + translation_;
    }

    Transform2D inverse() const
    {
        return {-rotation_, rotate(translation_, -rotation_) * -1.0};
    }

    /* (this * other)(p) = this(other(p)) */
    Transform2D operator*(const Transform2D& other) const
    {
        return {rotation_ + other.rotation_, apply(other.translation_)};
    }

private:
    double rotation_ = 0.0;
    Point2D translation_{};
};

/*
 * Robot pose in the global frame. Heading is kept in (-pi, pi].
 */
class Pose2D {
public:
    Pose2D() = default;
    Pose2D(double x, double y, double theta)
        : x_(x), y_(y), theta_(wrap_angle(theta))
    {
        if (!std::isfinite(x) || !std::isfinite(y))
            throw std::invalid_argument("Pose2D: non-finite position");
    }
    Pose2D(const Point2D& position, double theta)
        : Pose2D(position.x, position.y, theta) {}

    double x() const { return x_; }
    double y() const { return y_; }
    double theta() const { return theta_; }
    Point2D position() const { return {x_, y_}; }

    /* The pose read as the frame transform robot -> global */
    Transform2D as_transform() const { return {theta_, position()}; }

    bool operator==(const Pose2D&) const = default;

private:
    double x_ = 0.0;
    double y_ = 0.0;
    double theta_ = 0.0;
};

inline Pose2D to_pose(const Transform2D& t)
{
    return {t.translation(), t.rotation()};
}

/* outer o offset; `offset` is expressed in the frame of `outer`. */
inline Pose2D compose(const Pose2D& outer, const Transform2D& offset)
{
    return to_pose(outer.as_transform() * offset);
}

/* Offset t such that compose(from, t) == to. */
inline Transform2D between(const Pose2D& from, const Pose2D& to)
{
    return from.as_transform().inverse() * to.as_transform();
}

/*
 * Apply a global-frame correction to a pose: the position is moved by the
 * rigid motion and the heading rotated by its angle.
 */
inline Pose2D transform_pose(const Transform2D& correction, const Pose2D& pose)
{
    return to_pose(correction * pose.as_transform());
}

}  // namespace scanmatch

#endif  // SCANMATCH_CORE_HPP
