#pragma once

#include <stdexcept>
#include <string>

namespace stagecost {

// Error categories map 1:1 onto CLI exit codes and C API status values:
// validation/config -> 2, numeric failure -> 3, I/O failure -> 4.

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stagecost
