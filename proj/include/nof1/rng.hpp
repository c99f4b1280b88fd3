#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace nof1 {

// Seeds for independent substreams are derived, never shared: every consumer
// (cluster, phase, tree, fold, resample) hashes its own tags into the master
// seed with the SplitMix64 finalizer. Results are then independent of the
// order in which units are processed and of the worker count.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a hash of a phase tag such as "covariates" or "split".
std::uint64_t tag(std::string_view name);

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);

// mt19937_64 engine with portable derived distributions. The standard
// library distributions are implementation-defined, so uniform and normal
// draws are computed here to keep streams identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n); rejection-sampled, unbiased.
  std::uint64_t index(std::uint64_t n);

  // Standard normal via Box-Muller (cosine branch only, no cached state).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nof1
