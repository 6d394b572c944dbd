#include "absim/report.hpp"

#include <cstdio>
#include <cstring>

namespace absim {

namespace {

std::uint64_t status_field_kib(const char* field) {
  std::FILE* f = std::fopen("/proc/self/status", "r");
  if (!f) return 0;
  char line[256];
  std::uint64_t kib = 0;
  const std::size_t field_len = std::strlen(field);
  while (std::fgets(line, sizeof(line), f)) {
    if (std::strncmp(line, field, field_len) == 0) {
      std::sscanf(line + field_len, "%lu", &kib);
      break;
    }
  }
  std::fclose(f);
  return kib;
}

}  // namespace

std::uint64_t peak_rss_bytes() { return status_field_kib("VmHWM:") * 1024; }

std::uint64_t current_rss_bytes() { return status_field_kib("VmRSS:") * 1024; }

}  // namespace absim
