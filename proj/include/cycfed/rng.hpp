#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace cycfed {

// Hierarchical counter-based random streams. A stream is identified by a
// root seed plus a path of integers (run, cycle-epoch, round, client, ...).
// Distinct paths give statistically independent sequences, and a stream's
// output depends only on (root, path), never on what other streams were
// consumed before it. That keeps runs reproducible under any execution
// order of the per-round / per-client work.
//
// The generator is splitmix64 over a key derived by hashing the path into
// the root seed. All draws go through explicit, implementation-independent
// code paths (no std::uniform_*_distribution), so byte-identical output is
// preserved across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t root_seed) : key_(finalize(root_seed)), state_(key_) {}

  // Derived stream for one path element. Chain calls to build deeper paths.
  RngStream child(std::uint64_t id) const {
    RngStream s(*this);
    s.key_ = finalize(key_ ^ (0x9e3779b97f4a7c15ULL * (id + 0x632be59bd9b4e019ULL)));
    s.state_ = s.key_;
    return s;
  }

  RngStream child(std::initializer_list<std::uint64_t> ids) const {
    RngStream s(*this);
    for (std::uint64_t id : ids) s = s.child(id);
    return s;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return finalize(state_);
  }

  // Unbiased draw in [0, n) by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller on explicit uniforms.
  double gaussian() {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Fisher-Yates permutation of [0, n).
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform_below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[i], p[j]);
    }
    return p;
  }

  // N distinct indices from [0, pool), ascending order.
  std::vector<int> sample_without_replacement(int pool, int n) {
    std::vector<int> idx(pool);
    for (int i = 0; i < pool; ++i) idx[i] = i;
    for (int i = 0; i < n; ++i) {
      const int j = i + static_cast<int>(uniform_below(static_cast<std::uint64_t>(pool - i)));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t state_;
};

// Fixed purpose tags for the first path element under a run's root stream.
namespace stream_tag {
inline constexpr std::uint64_t kSelection = 1;    // client subsampling, path (k, i)
inline constexpr std::uint64_t kPermutation = 2;  // SSGD component order, path (k, m)
inline constexpr std::uint64_t kMinibatch = 3;    // SGD minibatches, path (k, i, m)
inline constexpr std::uint64_t kPopulation = 4;   // synthetic population construction
inline constexpr std::uint64_t kInit = 5;         // initial model directions
}  // namespace stream_tag

}  // namespace cycfed
