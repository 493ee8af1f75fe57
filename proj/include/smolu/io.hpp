#pragma once

#include <string>

namespace smolu {

/// Shortest round-trip text for a double (17 significant digits).
std::string format_double(double v);

/// Writes content to a temporary sibling file and renames it into place.
void atomic_write(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

}  // namespace smolu
