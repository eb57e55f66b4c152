#pragma once

#include <cstdint>

#include "gridengine/model.hpp"

namespace gridengine {

/// Deterministic meshed test grid of `buses` buses (>= 2) for benchmarks:
/// a rectangular mesh with random chords, bus 1 as slack, random loads and
/// PV generation balanced against them, and branch ratings set a margin
/// above the DC base-case flows so that N-1 screening finds violations.
/// The same (buses, seed) pair gives the same model on every platform.
NetworkModel synthetic_grid(int buses, std::uint64_t seed);

}  // namespace gridengine
