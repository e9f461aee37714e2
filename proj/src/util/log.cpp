#include "taillight/log.hpp"

#include <atomic>
#include <iostream>

namespace taillight {

namespace {
std::ostream* g_stream = nullptr;
std::atomic<std::size_t> g_warnings{0};

std::ostream& out() { return g_stream ? *g_stream : std::cerr; }
}  // namespace

void set_log_stream(std::ostream* stream) { g_stream = stream; }

void log_info(const std::string& message) { out() << "[info] " << message << '\n'; }

void log_warning(const std::string& message) {
  ++g_warnings;
  out() << "[warning] " << message << '\n';
}

std::size_t warning_count() { return g_warnings.load(); }

}  // namespace taillight
