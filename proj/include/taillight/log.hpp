#pragma once

#include <cstddef>
#include <ostream>
#include <string>

namespace taillight {

// Warnings go to stderr unless redirected; the count lets callers and tests
// see that one was raised.
void set_log_stream(std::ostream* stream);
void log_info(const std::string& message);
void log_warning(const std::string& message);
std::size_t warning_count();

}  // namespace taillight
