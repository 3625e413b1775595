#pragma once

#include <catch_amalgamated.hpp>

// Catch::Approx defaults to a relative epsilon near 1e-5, which would swallow the margins below.
inline Catch::Approx Approx(double value) { return Catch::Approx(value).epsilon(1e-12); }
