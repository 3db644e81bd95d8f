#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fieldfuse {

// Feature vectors are the 13 Sentinel-2 bands followed by four indices.
inline constexpr int kBandCount = 13;
inline constexpr int kFeatureCount = 17;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-fatal conditions collected by operations that must not abort.
using Warnings = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Logging: one line per event on stderr, "fieldfuse[level] message".

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Quiet = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_warn(std::string_view m) { log(LogLevel::Warn, m); }
void log_warnings(const Warnings& warnings);

// ---------------------------------------------------------------------------
// Seeding. Every consumer of randomness draws from its own stream derived from
// (master seed, purpose tag, index) so enabling one stage never shifts another.

using Rng = std::mt19937_64;

std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index = 0);
inline Rng make_rng(std::uint64_t master, std::string_view purpose,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, purpose, index));
}

// Uniform integer in [0, n) without std::uniform_int_distribution so streams
// are reproducible across standard library implementations.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform real in [0, 1) built from the top 53 bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (deterministic across platforms).
double standard_normal(Rng& rng);

// ---------------------------------------------------------------------------
// OpenMP shim.

void set_thread_count(int threads);
int thread_count();

// ---------------------------------------------------------------------------
// Small text helpers shared by the CSV readers.

std::vector<std::string> split_csv_line(std::string_view line);
std::string format_double(double v);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

} // namespace fieldfuse
