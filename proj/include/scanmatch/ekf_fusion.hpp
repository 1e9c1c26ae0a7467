#ifndef SCANMATCH_EKF_FUSION_HPP
#define SCANMATCH_EKF_FUSION_HPP

#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "scanmatch/core.hpp"
#include "scanmatch/odometry.hpp"

namespace scanmatch {

struct EkfState {
    Pose2D pose{};
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // mm^2, mm rad, rad^2
};

/*
 * Process noise is expressed over the odometry inputs (dS, dtheta):
 *   Q = diag((k_s |dS|)^2, (k_theta |dtheta| + k_drift)^2)
 * Measurement noise defaults to one cell in x and y and 0.25 deg.
 */
struct NoiseModel {
    double k_s = 0.01;
    double k_theta = 0.02;
    double k_drift = deg2rad(0.02);
    Eigen::Matrix3d measurement_R = default_measurement(50.0);
    bool joseph_form = false;

    static Eigen::Matrix3d default_measurement(double cell_size)
    {
        const double th = deg2rad(0.25);
        return Eigen::Vector3d(cell_size * cell_size, cell_size * cell_size, th * th)
            .asDiagonal();
    }

    Eigen::Matrix2d process_Q(const Displacement& d) const
    {
        const double ss = k_s * std::abs(d.distance);
        const double st = k_theta * std::abs(d.rotation) + k_drift;
        return Eigen::Vector2d(ss * ss, st * st).asDiagonal();
    }
};

struct MotionJacobians {
    Eigen::Matrix3d state;    // J_v
    Eigen::Matrix<double, 3, 2> input;  // J_u, over (dS, dtheta)
};

/* Jacobians of the heading-first motion model at the given step. */
inline MotionJacobians motion_jacobians(const Pose2D& pose, const Displacement& d)
{
    const double th = pose.theta() + d.rotation;
    const double c = std::cos(th);
    const double s = std::sin(th);
    MotionJacobians j;
    j.state << 1.0, 0.0, -d.distance * s,
               0.0, 1.0, d.distance * c,
               0.0, 0.0, 1.0;
    j.input << c, -d.distance * s,
               s, d.distance * c,
               0.0, 1.0;
    return j;
}

inline EkfState predict(const EkfState& state, const Displacement& d,
                        const Eigen::Matrix2d& Q)
{
    const MotionJacobians j = motion_jacobians(state.pose, d);
    EkfState out;
    out.pose = predict_pose(state.pose, d);
    out.covariance = j.state * state.covariance * j.state.transpose() +
                     j.input * Q * j.input.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

inline EkfState predict(const EkfState& state, const OdometryParams& params,
                        const WheelTicks& ticks, const NoiseModel& noise)
{
    const Displacement d = displacement(params, ticks);
    return predict(state, d, noise.process_Q(d));
}

/* Innovation measured - predicted, heading wrapped. */
inline Eigen::Vector3d innovation(const Pose2D& predicted, const Pose2D& measured)
{
    return {measured.x() - predicted.x(), measured.y() - predicted.y(),
            wrap_angle(measured.theta() - predicted.theta())};
}

struct UpdateResult {
    EkfState state;
    bool accepted = false;
    Eigen::Vector3d innovation = Eigen::Vector3d::Zero();
};

/*
 * Direct pose observation (H = I). Rejected when the innovation covariance
 * has a condition number above 1e12.
 */
inline UpdateResult update(const EkfState& predicted, const Pose2D& measured,
                           const Eigen::Matrix3d& R, bool joseph_form = false)
{
    UpdateResult res;
    res.state = predicted;
    res.innovation = innovation(predicted.pose, measured);

    const Eigen::Matrix3d& P = predicted.covariance;
    const Eigen::Matrix3d S = P + R;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(S, Eigen::EigenvaluesOnly);
    const double smin = eig.eigenvalues()(0);
    const double smax = eig.eigenvalues()(2);
    if (!(smin > 0.0) || smax / smin > 1e12)
        return res;

    const Eigen::Matrix3d W = P * S.inverse();
    const Eigen::Vector3d dx = W * res.innovation;
    res.state.pose = Pose2D(predicted.pose.x() + dx(0), predicted.pose.y() + dx(1),
                            predicted.pose.theta() + dx(2));
    Eigen::Matrix3d post;
    if (joseph_form) {
        const Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity() - W;
        post = ikh * P * ikh.transpose() + W * R * W.transpose();
    } else {
        post = P - W * S * W.transpose();
    }
    res.state.covariance = 0.5 * (post + post.transpose());
    res.accepted = true;
    return res;
}

inline UpdateResult update(const EkfState& predicted, const Pose2D& measured,
                           const NoiseModel& noise)
{
    return update(predicted, measured, noise.measurement_R, noise.joseph_form);
}

}  // namespace scanmatch

#endif  // SCANMATCH_EKF_FUSION_HPP
