#pragma once

#include <json.hpp>

namespace mmot {

// Order-preserving JSON type used across configs, descriptors and reports so
// that serialized output has a stable key order for diffing and round-trips.
using Json = nlohmann::ordered_json;

}  // namespace mmot
