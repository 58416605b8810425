// Basins of attraction of the Newton map of z^3 - 1 on [-2,2]^2.
//   basins_cubic [out.ppm]
#include <cstdio>

#include "newtondyn/newtondyn.hpp"

using namespace newtondyn;

int main(int argc, char** argv)
{
    const auto p = parse_complex_poly("z^3 - 1");
    const auto scan = render_basins(build_newton_complex(p), complex_root_points(p), square(2.0), 400, 400, ScanConfig{});

    for (const auto& [code, f] : scan.raster.fractions())
        std::printf("%-28s %.4f\n", scan.raster.legend.at(code).c_str(), f);

    write_raster(scan.raster, argc > 1 ? argv[1] : "basins_cubic.ppm");
    return 0;
}
