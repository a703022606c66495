#pragma once

#include <string_view>

// Data files from data/ compiled into the library (see cmake/EmbedResources.cmake).
namespace scholar::resources {

/// Returns the embedded content of `name` (path relative to data/).
/// Throws std::out_of_range for unknown names.
std::string_view get(std::string_view name);

bool has(std::string_view name);

}  // namespace scholar::resources
