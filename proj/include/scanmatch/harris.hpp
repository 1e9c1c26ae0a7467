#ifndef SCANMATCH_HARRIS_HPP
#define SCANMATCH_HARRIS_HPP

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "scanmatch/scan_image.hpp"

namespace scanmatch {

struct HarrisConfig {
    double k = 0.04;
    double response_threshold = 0.003;  // fraction of the maximum response
    int smoothing_window = 5;
    int nms_radius = 1;

    void validate() const
    {
        if (!(k > 0.0 && k < 0.25))
            throw std::invalid_argument("HarrisConfig: k must lie in (0, 0.25)");
        if (!(response_threshold > 0.0 && response_threshold < 1.0))
            throw std::invalid_argument(
                "HarrisConfig: threshold must lie in (0, 1)");
        if (smoothing_window < 3 || smoothing_window % 2 == 0)
            throw std::invalid_argument(
                "HarrisConfig: window must be odd and >= 3");
        if (nms_radius < 0)
            throw std::invalid_argument("HarrisConfig: nms radius must be >= 0");
    }

    /* Pixels beyond this distance cannot influence a response. */
    int influence_radius() const { return 2 * (smoothing_window / 2) + 1; }
};

struct Keypoint {
    std::int64_t row = 0;
    std::int64_t col = 0;
    double response = 0.0;

    bool operator==(const Keypoint&) const = default;
};

/* Half-open rectangle of pixel coordinates. May extend past the image. */
struct PixelRect {
    std::int64_t row0 = 0, row1 = 0;
    std::int64_t col0 = 0, col1 = 0;

    std::int64_t rows() const { return row1 - row0; }
    std::int64_t cols() const { return col1 - col0; }
    bool contains(std::int64_t r, std::int64_t c) const
    {
        return r >= row0 && r < row1 && c >= col0 && c < col1;
    }
    PixelRect grown(std::int64_t m) const
    {
        return {row0 - m, row1 + m, col0 - m, col1 + m};
    }
};

struct ResponseMap {
    PixelRect rect;
    std::vector<double> values;

    double at(std::int64_t r, std::int64_t c) const
    {
        return values[static_cast<std::size_t>((r - rect.row0) * rect.cols() +
                                                (c - rect.col0))];
    }
};

namespace detail {

/* Integral image with a zero row/column in front. */
template <typename T>
class Integral {
public:
    Integral(std::int64_t rows, std::int64_t cols)
        : rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>((rows + 1) * (cols + 1)), T{0}) {}

    template <typename Fn>
    void build(Fn&& value)
    {
        for (std::int64_t r = 0; r < rows_; ++r) {
            T row_sum{0};
            for (std::int64_t c = 0; c < cols_; ++c) {
                row_sum += value(r, c);
                cell(r + 1, c + 1) = cell(r, c + 1) + row_sum;
            }
        }
    }

    /* Sum over [r0, r1) x [c0, c1), local coordinates. */
    T sum(std::int64_t r0, std::int64_t r1, std::int64_t c0, std::int64_t c1) const
    {
        return cell(r1, c1) - cell(r0, c1) - cell(r1, c0) + cell(r0, c0);
    }

private:
    T& cell(std::int64_t r, std::int64_t c)
    {
        return data_[static_cast<std::size_t>(r * (cols_ + 1) + c)];
    }
    const T& cell(std::int64_t r, std::int64_t c) const
    {
        return data_[static_cast<std::size_t>(r * (cols_ + 1) + c)];
    }

    std::int64_t rows_, cols_;
    std::vector<T> data_;
};

}  // namespace detail

/*
 * Harris response R = det(M) - k trace(M)^2 for every pixel in `region`.
 * The image is box-smoothed, differentiated with centred differences, and
 * the structure tensor is summed over the same box. Everything outside the
 * image is zero. All sums are exact integers so the result is invariant
 * under quarter-turn rotations of the image.
 */
inline ResponseMap harris_response(const GridImage& img, const HarrisConfig& cfg,
                                   const PixelRect& region)
{
    const std::int64_t h = cfg.smoothing_window / 2;
    const std::int64_t w = 2 * h + 1;
    const PixelRect grad = region.grown(h);
    const PixelRect smooth = grad.grown(1);
    const PixelRect raw = smooth.grown(h);

    detail::Integral<std::int64_t> raw_int(raw.rows(), raw.cols());
    raw_int.build([&](std::int64_t r, std::int64_t c) -> std::int64_t {
        const std::int64_t ir = r + raw.row0;
        const std::int64_t ic = c + raw.col0;
        return img.contains(ir, ic) ? img.at(ir, ic) : 0;
    });

    // box-smoothed image over `smooth`
    std::vector<std::int64_t> s(static_cast<std::size_t>(smooth.rows() * smooth.cols()));
    for (std::int64_t r = 0; r < smooth.rows(); ++r)
        for (std::int64_t c = 0; c < smooth.cols(); ++c)
            s[static_cast<std::size_t>(r * smooth.cols() + c)] =
                raw_int.sum(r, r + w, c, c + w);
    auto S = [&](std::int64_t r, std::int64_t c) {
        return s[static_cast<std::size_t>((r - smooth.row0) * smooth.cols() +
                                          (c - smooth.col0))];
    };

    std::vector<std::int64_t> gr(static_cast<std::size_t>(grad.rows() * grad.cols()));
    std::vector<std::int64_t> gc(gr.size());
    for (std::int64_t r = 0; r < grad.rows(); ++r) {
        for (std::int64_t c = 0; c < grad.cols(); ++c) {
            const std::int64_t ar = r + grad.row0;
            const std::int64_t ac = c + grad.col0;
            const auto idx = static_cast<std::size_t>(r * grad.cols() + c);
            gr[idx] = S(ar + 1, ac) - S(ar - 1, ac);
            gc[idx] = S(ar, ac + 1) - S(ar, ac - 1);
        }
    }

    auto at = [&](const std::vector<std::int64_t>& v, std::int64_t r, std::int64_t c) {
        return v[static_cast<std::size_t>(r * grad.cols() + c)];
    };
    detail::Integral<std::int64_t> irr(grad.rows(), grad.cols());
    detail::Integral<std::int64_t> icc(grad.rows(), grad.cols());
    detail::Integral<std::int64_t> irc(grad.rows(), grad.cols());
    irr.build([&](std::int64_t r, std::int64_t c) { return at(gr, r, c) * at(gr, r, c); });
    icc.build([&](std::int64_t r, std::int64_t c) { return at(gc, r, c) * at(gc, r, c); });
    irc.build([&](std::int64_t r, std::int64_t c) { return at(gr, r, c) * at(gc, r, c); });

    ResponseMap out;
    out.rect = region;
    out.values.resize(static_cast<std::size_t>(region.rows() * region.cols()));
    for (std::int64_t r = 0; r < region.rows(); ++r) {
        for (std::int64_t c = 0; c < region.cols(); ++c) {
            // region pixel (r, c) sits at (r + h, c + h) in the gradient grid
            const std::int64_t a = irr.sum(r, r + w, c, c + w);
            const std::int64_t b = icc.sum(r, r + w, c, c + w);
            const std::int64_t x = irc.sum(r, r + w, c, c + w);
            const __int128 det = static_cast<__int128>(a) * b -
                                 static_cast<__int128>(x) * x;
            const __int128 tr = static_cast<__int128>(a) + b;
            out.values[static_cast<std::size_t>(r * region.cols() + c)] =
                static_cast<double>(det) - cfg.k * static_cast<double>(tr * tr);
        }
    }
    return out;
}

inline ResponseMap harris_response(const GridImage& img, const HarrisConfig& cfg)
{
    return harris_response(img, cfg, PixelRect{0, img.rows, 0, img.cols});
}

/*
 * Corners inside `roi` (clipped to the image). Responses near the ROI edge
 * see the full image, so a window gives the same answer as a full-image
 * run restricted to that window, up to the relative threshold.
 */
inline std::vector<Keypoint> detect_keypoints(const GridImage& img,
                                              const HarrisConfig& cfg,
                                              PixelRect roi)
{
    cfg.validate();
    roi.row0 = std::max<std::int64_t>(roi.row0, 0);
    roi.col0 = std::max<std::int64_t>(roi.col0, 0);
    roi.row1 = std::min(roi.row1, img.rows);
    roi.col1 = std::min(roi.col1, img.cols);
    if (roi.rows() < cfg.smoothing_window || roi.cols() < cfg.smoothing_window)
        return {};

    const ResponseMap resp = harris_response(img, cfg, roi.grown(cfg.nms_radius));

    double max_r = 0.0;
    for (std::int64_t r = roi.row0; r < roi.row1; ++r)
        for (std::int64_t c = roi.col0; c < roi.col1; ++c)
            max_r = std::max(max_r, resp.at(r, c));
    if (!(max_r > 0.0))
        return {};
    const double floor = cfg.response_threshold * max_r;

    const std::int64_t n = cfg.nms_radius;
    std::vector<Keypoint> out;
    for (std::int64_t r = roi.row0; r < roi.row1; ++r) {
        for (std::int64_t c = roi.col0; c < roi.col1; ++c) {
            const double v = resp.at(r, c);
            if (!(v > floor))
                continue;
            bool is_max = true;
            for (std::int64_t dr = -n; dr <= n && is_max; ++dr)
                for (std::int64_t dc = -n; dc <= n; ++dc) {
                    if ((dr != 0 || dc != 0) && !(v > resp.at(r + dr, c + dc))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max)
                out.push_back({r, c, v});
        }
    }
    std::sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.response != b.response)
            return a.response > b.response;
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    return out;
}

inline std::vector<Keypoint> detect_keypoints(const GridImage& img,
                                              const HarrisConfig& cfg)
{
    return detect_keypoints(img, cfg, PixelRect{0, img.rows, 0, img.cols});
}

/* Keypoint positions as lattice coordinates (cells) in the global frame. */
inline std::vector<Point2D> keypoint_positions(const GridImage& img,
                                               const std::vector<Keypoint>& kps)
{
    std::vector<Point2D> out;
    out.reserve(kps.size());
    for (const auto& k : kps)
        out.push_back(img.lattice_at(static_cast<double>(k.row),
                                     static_cast<double>(k.col)));
    return out;
}

/* Debug dump: positive responses scaled to 0..255. */
inline void write_response_pgm(std::ostream& os, const GridImage& img,
                               const HarrisConfig& cfg)
{
    const ResponseMap resp = harris_response(img, cfg);
    double max_r = 0.0;
    for (double v : resp.values)
        max_r = std::max(max_r, v);
    std::vector<std::uint8_t> px(resp.values.size(), 0);
    if (max_r > 0.0)
        for (std::size_t i = 0; i < px.size(); ++i)
            px[i] = static_cast<std::uint8_t>(
                std::clamp(255.0 * resp.values[i] / max_r, 0.0, 255.0));
    write_pgm(os, img.rows, img.cols, px);
}

}  // namespace scanmatch

#endif  // SCANMATCH_HARRIS_HPP
