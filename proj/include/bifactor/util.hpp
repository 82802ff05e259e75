#pragma once

#include <cstdint>
#include <functional>

namespace bifactor {

// splitmix64 of the packed (base, stream, index) triple: cheap, well-mixed,
// collision-free derivation of sub-seeds for starts and replications.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

// Seed-stream tags.
inline constexpr std::uint64_t kStreamTruth = 0x5452555448ull;
inline constexpr std::uint64_t kStreamData = 0x44415441ull;
inline constexpr std::uint64_t kStreamFit = 0x464954ull;
inline constexpr std::uint64_t kStreamStart = 0x5354415254ull;

// Number of worker threads: n_threads if positive, else the BIFACTOR_THREADS
// environment variable, else all hardware cores.
int resolve_threads(int n_threads);

// Runs fn(0..n-1) on up to n_threads workers. Results must be written to
// per-index slots; the first exception thrown by any worker is rethrown.
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

}  // namespace bifactor
