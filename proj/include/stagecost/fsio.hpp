#pragma once

#include <string>

namespace stagecost {

/// Whole file as bytes; IoError names `what` and the path on failure.
std::string read_file(const std::string& path, const std::string& what);

/// Write through a temp file in the same directory, then rename into place.
/// Missing parent directories are created.
void write_file_atomic(const std::string& path, const std::string& bytes,
                       const std::string& what);

}  // namespace stagecost
