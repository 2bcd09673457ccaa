#pragma once

#include <string_view>

namespace mhmm {

/// Writes a warning line to stderr unless warnings are silenced. Thread-safe.
void warn(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace mhmm
