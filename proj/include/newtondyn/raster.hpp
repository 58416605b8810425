#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"

namespace newtondyn {

/// Pixel grid over a window. Row 0 is the top edge (ymax); pixel (col,row)
/// covers a half-open cell and is represented by its center.
struct PixelGrid {
    Box window;
    int width = 0;
    int height = 0;

    PixelGrid() = default;
    PixelGrid(const Box& w, int wd, int ht) : window(w), width(wd), height(ht)
    {
        if (!window.valid()) throw InvalidInput("invalid raster window");
        if (width < 1 || height < 1) throw InvalidInput("raster dimensions must be >= 1");
    }

    std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    std::size_t index(int col, int row) const { return static_cast<std::size_t>(row) * width + col; }

    Vec2 center(int col, int row) const
    {
        return {window.xmin + (col + 0.5) * window.width() / width,
                window.ymax - (row + 0.5) * window.height() / height};
    }
    Vec2 center(std::size_t idx) const { return center(static_cast<int>(idx % width), static_cast<int>(idx / width)); }

    /// (col,row) of the cell containing p, or nullopt outside the window.
    std::optional<std::pair<int, int>> locate(Vec2 p) const
    {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !window.contains(p)) return std::nullopt;
        int col = static_cast<int>(std::floor((p.x - window.xmin) / window.width() * width));
        int row = static_cast<int>(std::floor((window.ymax - p.y) / window.height() * height));
        col = std::clamp(col, 0, width - 1);
        row = std::clamp(row, 0, height - 1);
        return std::make_pair(col, row);
    }

    bool same_geometry(const PixelGrid& o) const
    {
        return window == o.window && width == o.width && height == o.height;
    }
};

/// Binary pixel set, used for alpha-limit approximations, Hutchinson iterates
/// and basin boundaries.
class OccupancyRaster {
public:
    OccupancyRaster() = default;
    OccupancyRaster(const Box& window, int width, int height) : grid_(window, width, height), bits_(grid_.size(), 0) {}

    static OccupancyRaster full(const Box& window, int width, int height)
    {
        OccupancyRaster r(window, width, height);
        std::fill(r.bits_.begin(), r.bits_.end(), std::uint8_t{1});
        r.count_ = r.bits_.size();
        return r;
    }

    const PixelGrid& grid() const { return grid_; }
    const Box& window() const { return grid_.window; }
    int width() const { return grid_.width; }
    int height() const { return grid_.height; }
    std::size_t count() const { return count_; }
    bool empty() const { return count_ == 0; }
    bool partial() const { return partial_; }
    void set_partial(bool v) { partial_ = v; }

    bool get(int col, int row) const { return bits_[grid_.index(col, row)] != 0; }
    bool get(std::size_t idx) const { return bits_[idx] != 0; }

    void set(int col, int row, bool v = true) { set(grid_.index(col, row), v); }
    void set(std::size_t idx, bool v = true)
    {
        const std::uint8_t nv = v ? 1 : 0;
        if (bits_[idx] == nv) return;
        bits_[idx] = nv;
        if (v)
            ++count_;
        else
            --count_;
    }

    /// Marks the cell containing p; false when p lies outside the window.
    bool mark(Vec2 p)
    {
        auto c = grid_.locate(p);
        if (!c) return false;
        set(c->first, c->second);
        return true;
    }

    /// Centers of all set pixels in row-major order.
    std::vector<Vec2> set_centers() const
    {
        std::vector<Vec2> out;
        out.reserve(count_);
        for (std::size_t i = 0; i < bits_.size(); ++i)
            if (bits_[i]) out.push_back(grid_.center(i));
        return out;
    }

    const std::vector<std::uint8_t>& bits() const { return bits_; }

    friend bool operator==(const OccupancyRaster& a, const OccupancyRaster& b)
    {
        return a.grid_.same_geometry(b.grid_) && a.bits_ == b.bits_;
    }

private:
    PixelGrid grid_;
    std::vector<std::uint8_t> bits_;
    std::size_t count_ = 0;
    bool partial_ = false;
};

inline OccupancyRaster union_of(const OccupancyRaster& a, const OccupancyRaster& b)
{
    if (!a.grid().same_geometry(b.grid())) throw InvalidInput("raster geometry mismatch");
    OccupancyRaster r = a;
    for (std::size_t i = 0; i < b.bits().size(); ++i)
        if (b.get(i)) r.set(i);
    return r;
}

// Outcome codes shared by basin rasters: roots are 0, 1, 2, ...
inline constexpr int kCycleCode = -1;
inline constexpr int kEscapedCode = -2;
inline constexpr int kSingularCode = -3;
inline constexpr int kUndecidedCode = -4;

inline bool is_attractor_code(int code) { return code >= 0 || code == kCycleCode || code == kEscapedCode; }

/// Per-pixel forward classification.
struct BasinRaster {
    PixelGrid grid;
    std::vector<int> codes;
    std::vector<int> iterations;
    std::map<int, std::string> legend;

    BasinRaster() = default;
    BasinRaster(const Box& window, int width, int height)
        : grid(window, width, height), codes(grid.size(), kUndecidedCode), iterations(grid.size(), 0)
    {
    }

    int width() const { return grid.width; }
    int height() const { return grid.height; }
    int code(int col, int row) const { return codes[grid.index(col, row)]; }

    /// Fraction of pixels per code; values sum to 1.
    std::map<int, double> fractions() const
    {
        std::map<int, std::size_t> counts;
        for (int c : codes) ++counts[c];
        std::map<int, double> out;
        for (const auto& [c, n] : counts) out[c] = static_cast<double>(n) / static_cast<double>(codes.size());
        return out;
    }

    double fraction(int code) const
    {
        const auto f = fractions();
        const auto it = f.find(code);
        return it == f.end() ? 0.0 : it->second;
    }
};

// ---------------------------------------------------------------------------
// Hausdorff distance via exact Euclidean distance transforms
// ---------------------------------------------------------------------------

namespace detail {

/// 1-D squared distance transform (lower envelope of parabolas).
inline void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z)
{
    const double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
                if (k < 0) break;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -inf : s;
        z[k + 1] = inf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = inf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = q - v[j];
        d[q] = dq * dq + f[v[j]];
    }
}

} // namespace detail

/// Squared Euclidean distance (in pixels) from every pixel to the nearest set
/// pixel of r. Row-major, same layout as r.
inline std::vector<double> squared_distance_transform(const OccupancyRaster& r)
{
    const int w = r.width(), h = r.height();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(r.bits().size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = r.get(i) ? 0.0 : inf;

    const int n = std::max(w, h);
    std::vector<int> v(n);
    std::vector<double> z(n + 1), f(n), d(n);
    for (int col = 0; col < w; ++col) {
        for (int row = 0; row < h; ++row) f[row] = g[static_cast<std::size_t>(row) * w + col];
        detail::edt_1d(f.data(), d.data(), h, v, z);
        for (int row = 0; row < h; ++row) g[static_cast<std::size_t>(row) * w + col] = d[row];
    }
    for (int row = 0; row < h; ++row) {
        double* line = g.data() + static_cast<std::size_t>(row) * w;
        std::copy(line, line + w, f.begin());
        detail::edt_1d(f.data(), line, w, v, z);
    }
    return g;
}

/// Directed distance max_{a in A} min_{b in B} |a - b| in pixel units.
inline double directed_hausdorff_pixels(const OccupancyRaster& a, const OccupancyRaster& b)
{
    const auto dt = squared_distance_transform(b);
    double worst = 0.0;
    for (std::size_t i = 0; i < dt.size(); ++i)
        if (a.get(i)) worst = std::max(worst, dt[i]);
    return std::sqrt(worst);
}

inline double hausdorff_pixel_distance(const OccupancyRaster& a, const OccupancyRaster& b)
{
    if (!a.grid().same_geometry(b.grid())) throw InvalidInput("hausdorff: raster geometry mismatch");
    if (a.empty() || b.empty()) throw InvalidInput("hausdorff: empty raster");
    return std::max(directed_hausdorff_pixels(a, b), directed_hausdorff_pixels(b, a));
}

} // namespace newtondyn
