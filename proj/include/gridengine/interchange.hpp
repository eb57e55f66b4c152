#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gridengine/model.hpp"

namespace gridengine {

inline constexpr const char* kInterchangeSchemaVersion = "1";

/// Reads the JSON interchange document (schema in docs/interchange.md).
/// Unknown keys are rejected. Errors: SchemaVersion when schema_version is
/// missing or unsupported, Schema for structural problems (the message
/// carries a JSON pointer such as "/network/buses/3/v_mag"), plus every
/// build_network error.
NetworkModel parse_interchange(std::string_view text);

/// Canonical document: sorted keys, two-space indentation, shortest
/// round-trip number formatting, trailing newline. Equal models give equal
/// bytes and parse_interchange(write_interchange(n)) == n.
std::string write_interchange(const NetworkModel& net);

/// FNV-1a hash of the canonical interchange text.
std::uint64_t model_fingerprint(const NetworkModel& net);

}  // namespace gridengine
