#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "scanmatch/ekf_fusion.hpp"

using namespace scanmatch;

namespace {

Eigen::Vector3d as_vec(const Pose2D& p) { return {p.x(), p.y(), p.theta()}; }

double min_eig(const Eigen::Matrix3d& m)
{
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m, Eigen::EigenvaluesOnly)
        .eigenvalues()(0);
}

Eigen::Matrix3d random_spd(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i)
        a(i / 3, i % 3) = n(rng);
    const Eigen::Vector3d scale(100.0, 100.0, 0.05);
    a = scale.asDiagonal() * a;
    return a * a.transpose() + 1e-6 * Eigen::Matrix3d::Identity();
}

}  // namespace

TEST(EkfPredict, ZeroTicksZeroNoiseKeepsCovariance)
{
    EkfState s;
    s.pose = Pose2D(10.0, 20.0, 0.3);
    s.covariance << 4, 1, 0.1, 1, 9, 0.2, 0.1, 0.2, 0.01;
    const EkfState p = predict(s, Displacement{0.0, 0.0}, Eigen::Matrix2d::Zero());
    EXPECT_EQ(p.pose, s.pose);
    EXPECT_TRUE(p.covariance.isApprox(s.covariance, 1e-15));
}

TEST(EkfPredict, ClosedFormInputNoise)
{
    EkfState s;  // theta = 0, P = 0
    const double qs = 4.0, qt = 1e-4;
    Eigen::Matrix2d Q = Eigen::Vector2d(qs, qt).asDiagonal();
    const EkfState p = predict(s, Displacement{100.0, 0.0}, Q);
    // J_u = [[1, 0], [0, 100], [0, 1]]
    Eigen::Matrix3d want;
    want << qs, 0, 0,
            0, 1e4 * qt, 100 * qt,
            0, 100 * qt, qt;
    EXPECT_TRUE(p.covariance.isApprox(want, 1e-12)) << p.covariance;
}

TEST(EkfPredict, JacobiansMatchFiniteDifferences)
{
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(-5000.0, 5000.0);
    std::uniform_real_distribution<double> a(-3.0, 3.0);
    std::uniform_real_distribution<double> ds(-200.0, 200.0);
    std::uniform_real_distribution<double> dt(-0.5, 0.5);
    for (int i = 0; i < 1000; ++i) {
        const Pose2D pose(u(rng), u(rng), a(rng));
        const Displacement d{ds(rng), dt(rng)};
        const MotionJacobians j = motion_jacobians(pose, d);
        auto f = [&](const Eigen::Vector3d& x, double s, double t) {
            return as_vec(predict_pose(Pose2D(x(0), x(1), x(2)), Displacement{s, t}));
        };
        const Eigen::Vector3d x0 = as_vec(pose);
        for (int k = 0; k < 3; ++k) {
            const double h = k < 2 ? 1e-3 : 1e-6;
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e(k) = h;
            Eigen::Vector3d col = (f(x0 + e, d.distance, d.rotation) -
                                   f(x0 - e, d.distance, d.rotation)) / (2 * h);
            col(2) = wrap_angle(col(2) * 2 * h) / (2 * h);
            for (int r = 0; r < 3; ++r)
                ASSERT_NEAR(col(r), j.state(r, k), 1e-5 * std::max(1.0, std::abs(j.state(r, k))));
        }
        for (int k = 0; k < 2; ++k) {
            const double h = k == 0 ? 1e-4 : 1e-7;
            const Eigen::Vector3d plus = f(x0, d.distance + (k == 0) * h, d.rotation + (k == 1) * h);
            const Eigen::Vector3d minus = f(x0, d.distance - (k == 0) * h, d.rotation - (k == 1) * h);
            Eigen::Vector3d col = (plus - minus) / (2 * h);
            col(2) = wrap_angle(plus(2) - minus(2)) / (2 * h);
            for (int r = 0; r < 3; ++r)
                ASSERT_NEAR(col(r), j.input(r, k), 1e-5 * std::max(1.0, std::abs(j.input(r, k))));
        }
    }
}

TEST(EkfUpdate, MeasurementEqualsPrediction)
{
    EkfState s;
    s.pose = Pose2D(1.0, 2.0, 0.5);
    s.covariance = Eigen::Vector3d(100, 200, 0.01).asDiagonal();
    const auto r = update(s, s.pose, NoiseModel{});
    ASSERT_TRUE(r.accepted);
    EXPECT_NEAR(r.state.pose.x(), 1.0, 1e-12);
    EXPECT_NEAR(r.state.pose.y(), 2.0, 1e-12);
    EXPECT_NEAR(r.state.pose.theta(), 0.5, 1e-12);
    EXPECT_LE(r.state.covariance.trace(), s.covariance.trace());
}

TEST(EkfUpdate, UnitCovariancesGiveMidpoint)
{
    EkfState s;
    s.pose = Pose2D(0.0, 0.0, 0.0);
    s.covariance = Eigen::Matrix3d::Identity();
    const Pose2D m(10.0, -4.0, 0.2);
    const auto r = update(s, m, Eigen::Matrix3d::Identity());
    ASSERT_TRUE(r.accepted);
    EXPECT_NEAR(r.state.pose.x(), 5.0, 1e-12);
    EXPECT_NEAR(r.state.pose.y(), -2.0, 1e-12);
    EXPECT_NEAR(r.state.pose.theta(), 0.1, 1e-12);
    EXPECT_TRUE(r.state.covariance.isApprox(0.5 * Eigen::Matrix3d::Identity(), 1e-12));
}

TEST(EkfUpdate, HugeMeasurementNoiseIgnoresMeasurement)
{
    EkfState s;
    s.pose = Pose2D(100.0, 50.0, 0.3);
    s.covariance = Eigen::Vector3d(2500, 2500, 1e-4).asDiagonal();
    const Eigen::Matrix3d R = NoiseModel::default_measurement(50.0) * 1e6;
    const auto r = update(s, Pose2D(150.0, 0.0, 0.35), R);
    ASSERT_TRUE(r.accepted);
    EXPECT_NEAR(r.state.pose.x(), 100.0, 1e-3);
    EXPECT_NEAR(r.state.pose.y(), 50.0, 1e-3);
    EXPECT_NEAR(r.state.pose.theta(), 0.3, 1e-3);
}

TEST(EkfUpdate, InnovationWrapsAcrossPi)
{
    EkfState s;
    s.pose = Pose2D(0.0, 0.0, deg2rad(-179.0));
    s.covariance = Eigen::Matrix3d::Identity();
    const auto r = update(s, Pose2D(0.0, 0.0, deg2rad(179.0)), Eigen::Matrix3d::Identity());
    EXPECT_NEAR(std::abs(r.innovation(2)), deg2rad(2.0), 1e-12);
    EXPECT_NEAR(std::abs(r.state.pose.theta()), kPi, 1e-12);
}

TEST(EkfUpdate, SingularInnovationIsRejected)
{
    EkfState s;
    s.covariance = Eigen::Matrix3d::Zero();
    const auto r = update(s, Pose2D(1.0, 1.0, 0.1), Eigen::Matrix3d::Zero());
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.state.pose, s.pose);

    Eigen::Matrix3d R = Eigen::Vector3d(1e6, 1e6, 1e-9).asDiagonal();
    EXPECT_FALSE(update(s, Pose2D(1.0, 1.0, 0.1), R).accepted);
}

TEST(EkfUpdate, DiagonalCaseIsScalarBlend)
{
    std::mt19937_64 rng(72);
    std::uniform_real_distribution<double> v(0.1, 1000.0);
    std::uniform_real_distribution<double> x(-100.0, 100.0);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector3d p(v(rng), v(rng), v(rng) * 1e-6);
        const Eigen::Vector3d q(v(rng), v(rng), v(rng) * 1e-6);
        EkfState s;
        s.pose = Pose2D(x(rng), x(rng), x(rng) / 100.0);
        s.covariance = p.asDiagonal();
        const Pose2D m(x(rng), x(rng), x(rng) / 100.0);
        const auto r = update(s, m, Eigen::Matrix3d(q.asDiagonal()));
        const Eigen::Vector3d inn(m.x() - s.pose.x(), m.y() - s.pose.y(),
                                  wrap_angle(m.theta() - s.pose.theta()));
        for (int k = 0; k < 3; ++k) {
            const double g = p(k) / (p(k) + q(k));
            const double want = as_vec(s.pose)(k) + g * inn(k);
            const double got = as_vec(r.state.pose)(k);
            ASSERT_NEAR(k == 2 ? wrap_angle(got - want) : got - want, 0.0, 1e-9);
            ASSERT_NEAR(r.state.covariance(k, k), (1 - g) * p(k), 1e-9 * p(k));
        }
    }
}

TEST(Ekf, RandomCyclesStaySymmetricPsd)
{
    std::mt19937_64 rng(73);
    std::uniform_real_distribution<double> ds(-150.0, 150.0);
    std::uniform_real_distribution<double> dt(-0.3, 0.3);
    std::normal_distribution<double> n(0.0, 1.0);
    const NoiseModel noise;
    for (bool joseph : {false, true}) {
        EkfState s;
        s.covariance = random_spd(rng);
        for (int i = 0; i < 10000; ++i) {
            s = predict(s, Displacement{ds(rng), dt(rng)}, noise.process_Q({ds(rng), dt(rng)}));
            const Eigen::Matrix3d prior = s.covariance;
            const Pose2D m(s.pose.x() + 50 * n(rng), s.pose.y() + 50 * n(rng),
                           s.pose.theta() + 0.01 * n(rng));
            const auto r = update(s, m, noise.measurement_R, joseph);
            s = r.state;
            const double scale = std::max(1.0, s.covariance.cwiseAbs().maxCoeff());
            ASSERT_LE((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff(),
                      1e-9 * scale);
            ASSERT_GE(min_eig(s.covariance), -1e-9 * scale);
            if (r.accepted) {
                ASSERT_GE(min_eig(prior - s.covariance),
                          -1e-9 * std::max(1.0, prior.cwiseAbs().maxCoeff()));
            }
        }
    }
}

TEST(NoiseModel, DefaultsAndProcessNoise)
{
    const NoiseModel n;
    EXPECT_NEAR(n.measurement_R(0, 0), 2500.0, 1e-9);
    EXPECT_NEAR(n.measurement_R(1, 1), 2500.0, 1e-9);
    EXPECT_NEAR(n.measurement_R(2, 2), std::pow(deg2rad(0.25), 2), 1e-15);
    const Eigen::Matrix2d q = n.process_Q({-100.0, -0.5});
    EXPECT_NEAR(q(0, 0), std::pow(n.k_s * 100.0, 2), 1e-12);
    EXPECT_NEAR(q(1, 1), std::pow(n.k_theta * 0.5 + n.k_drift, 2), 1e-15);
    EXPECT_EQ(q(0, 1), 0.0);
}
