// Backward tree of a point under N for z^3 - 1, measured against the
// forward basin boundary.
#include <cstdio>

#include "newtondyn/newtondyn.hpp"

using namespace newtondyn;

int main()
{
    const auto p = parse_complex_poly("z^3 - 1");
    const auto N = build_newton_complex(p);
    const Box window = square(2.0);
    constexpr int px = 256;

    const auto tree = backward_tree(InverseMap::complex(N), {5.0, 1.0}, 10, 1000000, window, px, px);
    const auto basins = render_basins(N, complex_root_points(p), window, px, px, ScanConfig{});
    const auto cmp = compare_alpha_boundary(tree.raster, extract_boundary(basins.raster));

    std::printf("depth %d, %zu nodes, %zu alpha pixels\n", tree.completed_depth, tree.nodes, cmp.alpha_pixel_count);
    std::printf("alpha -> boundary    %.2f px\n", cmp.alpha_to_boundary);
    std::printf("boundary -> alpha    %.2f px\n", cmp.boundary_to_alpha);
    std::printf("non-regular fraction %.3f\n", cmp.nonregular_fraction);
    return 0;
}
