#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "scanmatch/ransac_matcher.hpp"

using namespace scanmatch;

namespace {

/* Brute-force oracle for the iteration budget. */
int smallest_n(double delta, double eps, int j)
{
    const double miss = 1.0 - std::pow(1.0 - eps, j);
    for (int n = 1;; ++n)
        if (1.0 - std::pow(miss, n) >= delta)
            return n;
}

/* ref = t + R(-phi) cur */
Point2D to_ref(const Point2D& cur, double phi, const Point2D& t)
{
    return t + rotate(cur, -phi);
}

struct Planted {
    std::vector<MatchPair> matches;
    double phi;
    Point2D t;
};

Planted planted_matches(std::mt19937_64& rng, int total, int consistent)
{
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    std::uniform_real_distribution<double> a(-0.3, 0.3);
    std::uniform_real_distribution<double> s(-5.0, 5.0);
    Planted p{{}, a(rng), {s(rng), s(rng)}};
    for (int i = 0; i < consistent; ++i) {
        const Point2D cur{u(rng), u(rng)};
        p.matches.push_back({to_ref(cur, p.phi, p.t), cur});
    }
    for (int i = consistent; i < total; ++i)
        p.matches.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
    std::shuffle(p.matches.begin(), p.matches.end(), rng);
    return p;
}

}  // namespace

TEST(TentativeMatches, Examples)
{
    const std::vector<Point2D> ref = {{0, 0}};
    auto m = tentative_matches(ref, std::vector<Point2D>{{3, 4}}, 1.0);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].cur_point, (Point2D{3, 4}));

    m = tentative_matches(ref, std::vector<Point2D>{{3, 4}, {3.5, 4.5}}, 1.0);
    EXPECT_EQ(m.size(), 2u);

    EXPECT_TRUE(tentative_matches(ref, std::vector<Point2D>{}, 1.0).empty());
    EXPECT_TRUE(tentative_matches(std::vector<Point2D>{}, ref, 1.0).empty());
}

TEST(TentativeMatches, IdenticalSetsMatchThemselves)
{
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<Point2D> pts(30);
    for (auto& p : pts)
        p = {u(rng), u(rng)};
    for (double w : {0.0, 2.0, 5.0}) {
        const auto m = tentative_matches(pts, pts, w);
        for (const auto& r : pts) {
            bool self = false;
            for (const auto& mp : m)
                self = self || (mp.ref_point == r && mp.cur_point == r);
            ASSERT_TRUE(self);
        }
    }
}

TEST(TentativeMatches, BoxAroundNearestNeighbour)
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    std::vector<Point2D> ref(20), cur(40);
    for (auto& p : ref)
        p = {u(rng), u(rng)};
    for (auto& p : cur)
        p = {u(rng), u(rng)};
    const double w = 3.0;
    const auto m = tentative_matches(ref, cur, w);
    std::size_t expected = 0;
    for (const auto& r : ref) {
        const Point2D* nn = &cur[0];
        for (const auto& c : cur)
            if (distance(r, c) < distance(r, *nn))
                nn = &c;
        for (const auto& c : cur)
            if (std::abs(c.x - nn->x) <= w && std::abs(c.y - nn->y) <= w)
                ++expected;
    }
    EXPECT_EQ(m.size(), expected);
}

TEST(TwoMatchPose, IdentityAndQuarterTurn)
{
    auto h = pose_from_two_matches({{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, 0.5);
    ASSERT_TRUE(h);
    EXPECT_NEAR(h->phi_co, 0.0, 1e-12);
    EXPECT_NEAR(h->x_co, 0.0, 1e-12);
    EXPECT_NEAR(h->y_co, 0.0, 1e-12);

    const MatchPair m1{{0, 0}, {0, 0}};
    const MatchPair m2{{1, 0}, {0, 1}};
    h = pose_from_two_matches(m1, m2, 0.5);
    ASSERT_TRUE(h);
    EXPECT_NEAR(h->phi_co, kPi / 2, 1e-12);
    const std::vector<MatchPair> both = {m1, m2};
    const auto s = count_support(*h, both, 1e-9);
    EXPECT_EQ(s.support, 2);
    EXPECT_LE(s.mean_deviation, 1e-9);
}

TEST(TwoMatchPose, RigidityAndDegenerateRejects)
{
    EXPECT_FALSE(pose_from_two_matches({{0, 0}, {0, 0}}, {{1, 0}, {3, 0}}, 0.5));
    EXPECT_FALSE(pose_from_two_matches({{0, 0}, {2, 2}}, {{1, 0}, {2, 2}}, 5.0));
    EXPECT_FALSE(pose_from_two_matches({{1, 1}, {0, 0}}, {{1, 1}, {3, 0}}, 5.0));
}

TEST(TwoMatchPose, ClosureOnRandomPairs)
{
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    std::uniform_real_distribution<double> a(-kPi, kPi);
    for (int i = 0; i < 2000; ++i) {
        const double phi = a(rng);
        const Point2D t{u(rng), u(rng)};
        const Point2D c1{u(rng), u(rng)}, c2{u(rng), u(rng)};
        const std::vector<MatchPair> ms = {{to_ref(c1, phi, t), c1}, {to_ref(c2, phi, t), c2}};
        const auto h = pose_from_two_matches(ms[0], ms[1], 1.0);
        ASSERT_TRUE(h);
        ASSERT_NEAR(wrap_angle(h->phi_co - phi), 0.0, 1e-9);
        ASSERT_NEAR(h->x_co, t.x, 1e-9);
        ASSERT_NEAR(h->y_co, t.y, 1e-9);
        for (const auto& m : ms)
            ASSERT_LE(match_deviation(*h, m), 1e-9);
    }
}

TEST(CountSupport, IdentityPerturbationAndMonotoneTolerance)
{
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    std::vector<MatchPair> ms(50);
    for (auto& m : ms) {
        m.cur_point = {u(rng), u(rng)};
        m.ref_point = m.cur_point;
    }
    PoseHypothesis id;
    EXPECT_EQ(count_support(id, ms, 1.5).support, 50);

    ms[7].cur_point.x += 15.0;
    const auto s = count_support(id, ms, 1.5);
    EXPECT_EQ(s.support, 49);
    EXPECT_EQ(s.inliers.size(), 49u);

    for (auto& m : ms)
        m.cur_point = m.cur_point + Point2D{u(rng) / 10.0, u(rng) / 10.0};
    int last = -1;
    for (double tol = 0.1; tol < 6.0; tol += 0.1) {
        const int n = count_support(id, ms, tol).support;
        ASSERT_GE(n, last);
        last = n;
    }
}

TEST(RequiredIterations, Examples)
{
    EXPECT_EQ(required_iterations(0.99, 0.0, 2), 1);
    EXPECT_EQ(required_iterations(0.99, 0.5, 2), 17);
    EXPECT_EQ(smallest_n(0.99, 0.5, 2), 17);
    EXPECT_EQ(required_iterations(0.99, 0.43, 2), smallest_n(0.99, 0.43, 2));
    EXPECT_EQ(required_iterations(0.99, 0.99, 2, 500), 500);
    EXPECT_THROW(required_iterations(0.99, 1.0, 2), std::invalid_argument);
    EXPECT_THROW(required_iterations(1.0, 0.5, 2), std::invalid_argument);
    EXPECT_THROW(required_iterations(0.9, 0.5, 0), std::invalid_argument);
}

TEST(RequiredIterations, MatchesBruteForceOnRandomInputs)
{
    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> d(0.5, 0.999);
    std::uniform_real_distribution<double> e(0.0, 0.9);
    for (int i = 0; i < 100; ++i) {
        const double delta = d(rng), eps = e(rng);
        ASSERT_EQ(required_iterations(delta, eps, 2), smallest_n(delta, eps, 2))
            << delta << ' ' << eps;
    }
}

TEST(Ransac, PlantedThirtySevenTwentyThree)
{
    std::mt19937_64 rng(46);
    for (int trial = 0; trial < 20; ++trial) {
        const Planted p = planted_matches(rng, 37, 23);
        RansacConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(trial + 1);
        const auto r = ransac_on_matches(p.matches, cfg);
        ASSERT_TRUE(r.best);
        EXPECT_GE(r.best->support, 23);
        // a stray outlier can tip the maximum-support pose slightly off the
        // planted one, but never by so much that a planted match drops out
        for (const auto& m : p.matches)
            if (distance(to_ref(m.cur_point, p.phi, p.t), m.ref_point) < 1e-9) {
                EXPECT_LE(match_deviation(*r.best, m), cfg.support_tol);
            }
        EXPECT_NEAR(r.best->x_co, p.t.x, 1.0);
        EXPECT_NEAR(r.best->y_co, p.t.y, 1.0);
        EXPECT_NEAR(rad2deg(wrap_angle(r.best->phi_co - p.phi)), 0.0, 1.0);
        EXPECT_EQ(static_cast<int>(r.best->inliers.size()), r.best->support);
        for (const auto& m : r.best->inliers)
            EXPECT_LE(match_deviation(*r.best, m), cfg.support_tol);
    }
}

TEST(Ransac, ExactMatchesGiveExactPose)
{
    std::mt19937_64 rng(47);
    const Planted p = planted_matches(rng, 30, 30);
    const auto r = ransac_on_matches(p.matches, RansacConfig{});
    ASSERT_TRUE(r.best);
    EXPECT_EQ(r.best->support, 30);
    EXPECT_NEAR(wrap_angle(r.best->phi_co - p.phi), 0.0, 1e-9);
    EXPECT_NEAR(r.best->x_co, p.t.x, 1e-9);
    EXPECT_NEAR(r.best->y_co, p.t.y, 1e-9);
}

TEST(Ransac, RandomMatchesAreRejected)
{
    std::mt19937_64 rng(48);
    std::uniform_real_distribution<double> u(0.0, 200.0);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<MatchPair> ms(30);
        for (auto& m : ms)
            m = {{u(rng), u(rng)}, {u(rng), u(rng)}};
        RansacConfig cfg;
        cfg.min_support = 4;
        cfg.seed = static_cast<std::uint64_t>(trial);
        if (!ransac_on_matches(ms, cfg).best)
            ++failures;
    }
    EXPECT_GE(failures, 95);
}

TEST(Ransac, TooFewMatches)
{
    const std::vector<MatchPair> one = {{{0, 0}, {0, 0}}};
    EXPECT_FALSE(ransac_on_matches(one, RansacConfig{}).best);
    EXPECT_FALSE(ransac_on_matches({}, RansacConfig{}).best);
}

TEST(Ransac, SeededDeterminism)
{
    std::mt19937_64 rng(49);
    const Planted p = planted_matches(rng, 60, 15);
    RansacConfig cfg;
    cfg.seed = 99;
    const auto a = ransac_on_matches(p.matches, cfg);
    const auto b = ransac_on_matches(p.matches, cfg);
    ASSERT_TRUE(a.best && b.best);
    EXPECT_EQ(a.best->phi_co, b.best->phi_co);
    EXPECT_EQ(a.best->x_co, b.best->x_co);
    EXPECT_EQ(a.best->y_co, b.best->y_co);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Ransac, PriorWindowExcludesFarHypotheses)
{
    std::mt19937_64 rng(50);
    Planted p = planted_matches(rng, 20, 20);
    RansacConfig cfg;
    cfg.max_rotation = std::abs(p.phi) / 2.0;
    EXPECT_FALSE(ransac_on_matches(p.matches, cfg).best);
    cfg.max_rotation = std::abs(p.phi) + 0.01;
    EXPECT_TRUE(ransac_on_matches(p.matches, cfg).best);
}

TEST(Ransac, ConfigValidation)
{
    RansacConfig c;
    c.sample_size_j = 3;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.support_tol = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.success_prob_delta = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Ransac, AlignRecoversShiftedKeypoints)
{
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-60.0, 60.0);
    std::vector<Point2D> ref;
    while (ref.size() < 25) {
        const Point2D p{u(rng), u(rng)};
        bool ok = true;
        for (const auto& q : ref)
            ok = ok && distance(p, q) > 8.0;
        if (ok)
            ref.push_back(p);
    }
    const double phi = deg2rad(2.0);
    const Point2D t{1.0, -1.5};
    std::vector<Point2D> cur;
    for (const auto& r : ref)
        cur.push_back(rotate(r - t, phi));  // inverse of ref = t + R(-phi) cur
    const auto res = ransac_align(ref, cur, RansacConfig{});
    ASSERT_TRUE(res.best);
    EXPECT_NEAR(res.best->phi_co, phi, 1e-9);
    EXPECT_NEAR(res.best->x_co, t.x, 1e-9);
    EXPECT_NEAR(res.best->y_co, t.y, 1e-9);
}
