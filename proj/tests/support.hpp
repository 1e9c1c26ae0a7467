#ifndef SCANMATCH_TESTS_SUPPORT_HPP
#define SCANMATCH_TESTS_SUPPORT_HPP

// Shared fixtures and slow reference implementations for the unit tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <tuple>
#include <vector>

#include "scanmatch/harris.hpp"
#include "scanmatch/scan_image.hpp"

namespace testsupport {

using namespace scanmatch;

inline GridImage blank_image(std::int64_t rows, std::int64_t cols)
{
    GridImage img;
    img.rows = rows;
    img.cols = cols;
    img.min_cell = {1, 1};
    img.pixels.assign(static_cast<std::size_t>(rows * cols), kEmpty);
    return img;
}

inline void fill(GridImage& img, std::int64_t r0, std::int64_t r1, std::int64_t c0,
                 std::int64_t c1)
{
    for (std::int64_t r = r0; r < r1; ++r)
        for (std::int64_t c = c0; c < c1; ++c)
            img.at(r, c) = kOccupied;
}

inline GridImage random_binary(std::mt19937_64& rng, std::int64_t rows, std::int64_t cols,
                               double density)
{
    GridImage img = blank_image(rows, cols);
    std::bernoulli_distribution on(density);
    for (auto& p : img.pixels)
        p = on(rng) ? kOccupied : kEmpty;
    return img;
}

/* Quarter turn: pixel (r, c) goes to (c, rows - 1 - r). */
inline GridImage rot90(const GridImage& img)
{
    GridImage out = blank_image(img.cols, img.rows);
    for (std::int64_t r = 0; r < img.rows; ++r)
        for (std::int64_t c = 0; c < img.cols; ++c)
            out.at(c, img.rows - 1 - r) = img.at(r, c);
    return out;
}

/*
 * Harris response computed the slow way, straight from the definition:
 * box sum of the image, centred differences, box sums of gradient products.
 */
inline std::vector<double> brute_force_response(const GridImage& img, const HarrisConfig& cfg)
{
    const std::int64_t h = cfg.smoothing_window / 2;
    auto I = [&](std::int64_t r, std::int64_t c) -> double {
        return img.contains(r, c) ? img.at(r, c) : 0.0;
    };
    auto S = [&](std::int64_t r, std::int64_t c) {
        double s = 0.0;
        for (std::int64_t dr = -h; dr <= h; ++dr)
            for (std::int64_t dc = -h; dc <= h; ++dc)
                s += I(r + dr, c + dc);
        return s;
    };
    std::vector<double> out(static_cast<std::size_t>(img.rows * img.cols));
    for (std::int64_t r = 0; r < img.rows; ++r)
        for (std::int64_t c = 0; c < img.cols; ++c) {
            double a = 0, b = 0, x = 0;
            for (std::int64_t dr = -h; dr <= h; ++dr)
                for (std::int64_t dc = -h; dc <= h; ++dc) {
                    const double gr = S(r + dr + 1, c + dc) - S(r + dr - 1, c + dc);
                    const double gc = S(r + dr, c + dc + 1) - S(r + dr, c + dc - 1);
                    a += gr * gr;
                    b += gc * gc;
                    x += gr * gc;
                }
            out[static_cast<std::size_t>(r * img.cols + c)] =
                (a * b - x * x) - cfg.k * (a + b) * (a + b);
        }
    return out;
}

inline std::vector<std::tuple<std::int64_t, std::int64_t>> cells_of(
    const std::vector<Keypoint>& kps)
{
    std::vector<std::tuple<std::int64_t, std::int64_t>> out;
    for (const auto& k : kps)
        out.emplace_back(k.row, k.col);
    std::sort(out.begin(), out.end());
    return out;
}

/* An irregular closed outline sampled every `step` mm, roughly centred on 0. */
inline std::vector<Point2D> outline_cloud(double step = 20.0)
{
    const std::vector<Point2D> corners = {{-600, -400}, {700, -400}, {700, 100},
                                          {300, 100},   {300, 500},  {-200, 650},
                                          {-600, 200}};
    std::vector<Point2D> out;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const Point2D a = corners[i];
        const Point2D b = corners[(i + 1) % corners.size()];
        const int n = static_cast<int>(std::ceil(distance(a, b) / step));
        for (int k = 0; k < n; ++k)
            out.push_back(a + (b - a) * (static_cast<double>(k) / n));
    }
    return out;
}

/* 60 points scattered over a 2 m square, pairwise at least 150 mm apart. */
inline std::vector<Point2D> scatter_cloud(std::uint64_t seed = 1)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1000.0, 1000.0);
    std::vector<Point2D> out;
    while (out.size() < 60) {
        const Point2D p{u(rng), u(rng)};
        bool ok = true;
        for (const auto& q : out)
            ok = ok && distance(p, q) > 150.0;
        if (ok)
            out.push_back(p);
    }
    return out;
}

}  // namespace testsupport

#endif
