#include "cycfed/schedule.hpp"

#include <algorithm>
#include <stdexcept>

namespace cycfed {

CycleSchedule::CycleSchedule(std::vector<std::vector<int>> groups, TraversalOrder order,
                             std::uint64_t order_seed)
    : groups_(std::move(groups)) {
  if (groups_.empty()) throw std::invalid_argument("schedule needs at least one group");
  const int gsize = static_cast<int>(groups_.front().size());
  if (gsize == 0) throw std::invalid_argument("groups must be non-empty");
  std::vector<int> seen;
  for (auto& g : groups_) {
    if (static_cast<int>(g.size()) != gsize)
      throw std::invalid_argument("groups must have equal size");
    std::sort(g.begin(), g.end());
    seen.insert(seen.end(), g.begin(), g.end());
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw std::invalid_argument("groups must be disjoint");

  const int k_bar = num_groups();
  if (order == TraversalOrder::Identity) {
    order_.resize(k_bar);
    for (int i = 0; i < k_bar; ++i) order_[i] = i;
  } else {
    order_ = RngStream(order_seed).child(0xD1CE).permutation(k_bar);
  }
}

std::vector<int> CycleSchedule::select_round_clients(int k, int i, int n, RngStream rng) const {
  (void)k;
  if (i < 1 || i > num_groups()) throw std::out_of_range("round-in-cycle out of range");
  const std::vector<int>& grp = group_at_round(i);
  if (n < 1 || n > static_cast<int>(grp.size()))
    throw std::invalid_argument("N must be in [1, group size]");
  std::vector<int> pos = rng.sample_without_replacement(static_cast<int>(grp.size()), n);
  std::vector<int> out(n);
  for (int j = 0; j < n; ++j) out[j] = grp[pos[j]];
  return out;  // grp sorted, pos ascending -> out ascending
}

std::vector<int> draw_permutation(int b, RngStream rng) {
  if (b < 1) throw std::invalid_argument("permutation size must be >= 1");
  return rng.permutation(b);
}

std::pair<int, int> round_to_indices(int t, int k_bar) {
  if (t < 0 || k_bar < 1) throw std::invalid_argument("t >= 0 and K_bar >= 1 required");
  return {t / k_bar + 1, t % k_bar + 1};
}

}  // namespace cycfed
