#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace flesd {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Order-sensitive hash of a seed path, e.g. derive_seed({global, round, client}).
// Used wherever independent streams must not depend on execution order.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

// Stable tags for derive_seed paths.
enum class SeedTag : std::uint64_t {
  kData = 0x64617461,
  kSplit = 0x73706c74,
  kPartition = 0x70617274,
  kInit = 0x696e6974,
  kClient = 0x636c6e74,
  kSample = 0x736d706c,
  kDistill = 0x6473746c,
  kProbe = 0x70726f62,
  kSupervised = 0x73757076,
};

inline std::uint64_t tag(SeedTag t) { return static_cast<std::uint64_t>(t); }

}  // namespace flesd
