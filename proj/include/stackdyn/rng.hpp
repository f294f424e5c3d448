#pragma once

#include <cstdint>
#include <random>

namespace stackdyn {

// splitmix64 finalizer; the standard strong 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Every stream of randomness in the artifact derives from one root seed via
// this rule: child = mix64(mix64(root ^ mix64(task)) ^ mix64(replica)).
// task = which consumer (noise stream, replica init, search start, ...),
// replica = index within that consumer.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t task, std::uint64_t replica = 0) {
  return mix64(mix64(root ^ mix64(task)) ^ mix64(replica));
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::uint64_t task, std::uint64_t replica = 0) {
  return std::mt19937_64(derive_seed(root, task, replica));
}

// Fixed task ids so independent consumers never collide on a stream.
namespace seed_task {
inline constexpr std::uint64_t kNoise = 1;
inline constexpr std::uint64_t kLockinInit = 2;
inline constexpr std::uint64_t kSearchStarts = 3;
inline constexpr std::uint64_t kGameDraw = 4;
inline constexpr std::uint64_t kProbe = 5;
inline constexpr std::uint64_t kSweepCell = 6;
}  // namespace seed_task

}  // namespace stackdyn
