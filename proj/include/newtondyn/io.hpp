#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "poly.hpp"
#include "raster.hpp"

namespace newtondyn {

/// File could not be written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rgb = std::array<std::uint8_t, 3>;

/// Root codes cycle through nine colors; the special codes have fixed colors.
inline Rgb palette(int code)
{
    static constexpr Rgb roots[9] = {{230, 57, 70},  {42, 157, 143}, {69, 123, 157}, {244, 162, 97}, {38, 70, 83},
                                     {144, 190, 109}, {106, 76, 147}, {255, 202, 58}, {25, 130, 196}};
    if (code >= 0) return roots[code % 9];
    switch (code) {
    case kCycleCode: return {0, 255, 255};
    case kEscapedCode: return {255, 255, 255};
    case kSingularCode: return {128, 128, 128};
    default: return {0, 0, 0};
    }
}

namespace detail {

inline std::string ppm_header(int width, int height)
{
    return "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

} // namespace detail

/// Binary PPM (P6, maxval 255), row 0 at the top.
inline std::string ppm_bytes(const BasinRaster& r)
{
    std::string out = detail::ppm_header(r.width(), r.height());
    out.reserve(out.size() + 3 * r.codes.size());
    for (int c : r.codes) {
        const Rgb rgb = palette(c);
        out.append(reinterpret_cast<const char*>(rgb.data()), 3);
    }
    return out;
}

/// Set pixels black on white.
inline std::string ppm_bytes(const OccupancyRaster& r)
{
    std::string out = detail::ppm_header(r.width(), r.height());
    out.reserve(out.size() + 3 * r.bits().size());
    for (std::uint8_t b : r.bits()) out.append(3, b ? '\0' : '\xff');
    return out;
}

/// One point per line, "x,y" with 17 significant digits.
inline std::string csv_bytes(const std::vector<Vec2>& points)
{
    std::string out;
    for (Vec2 p : points) out += detail::format_double(p.x) + "," + detail::format_double(p.y) + "\n";
    return out;
}

inline void write_file(const std::string& path, const std::string& bytes)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    if (!f) throw IoError("failed writing '" + path + "'");
}

inline void write_raster(const BasinRaster& r, const std::string& path) { write_file(path, ppm_bytes(r)); }
inline void write_raster(const OccupancyRaster& r, const std::string& path) { write_file(path, ppm_bytes(r)); }

} // namespace newtondyn
