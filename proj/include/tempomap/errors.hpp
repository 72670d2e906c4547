#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tempomap {

// Malformed or inconsistent input data (bad CSV, ragged grids, missing
// features). Maps to CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite likelihoods, underflowing emissions, singular solves.
// Maps to CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(std::string_view)>;

// Emits a warning through the installed handler (stderr by default).
void warn(std::string_view message);

// Replaces the warning handler and returns the previous one. Passing an
// empty function restores the stderr default.
WarningHandler set_warning_handler(WarningHandler handler);

}  // namespace tempomap
