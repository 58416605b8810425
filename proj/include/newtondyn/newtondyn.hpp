#pragma once

// Umbrella header for the library. job.hpp (config-driven runs) is separate
// because it needs nlohmann/json.

#include "analysis.hpp"
#include "backward.hpp"
#include "forward.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "newton.hpp"
#include "parallel.hpp"
#include "parse.hpp"
#include "poly.hpp"
#include "raster.hpp"
