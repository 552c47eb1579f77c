#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cycfed/rng.hpp"

namespace cycfed {

enum class TraversalOrder { Identity, Shuffled };

// Cyclic participation structure: K_bar disjoint client groups visited in a
// traversal order that is fixed at construction and never changes across
// cycle-epochs. Round i of every cycle-epoch draws N clients without
// replacement from group sigma(order(i)).
class CycleSchedule {
 public:
  // `groups` are the disjoint index sets sigma(1..K_bar), equal sizes.
  CycleSchedule(std::vector<std::vector<int>> groups, TraversalOrder order,
                std::uint64_t order_seed = 0);

  int num_groups() const { return static_cast<int>(groups_.size()); }
  int group_size() const { return static_cast<int>(groups_.front().size()); }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  const std::vector<int>& order() const { return order_; }

  // Group visited at round-in-cycle i (1-based).
  const std::vector<int>& group_at_round(int i) const { return groups_.at(order_.at(i - 1)); }

  // N distinct clients from the round's group, uniform without replacement,
  // ascending client index. `rng` should be the stream at path
  // (selection, k, i) so draws are independent across rounds.
  std::vector<int> select_round_clients(int k, int i, int n, RngStream rng) const;

 private:
  std::vector<std::vector<int>> groups_;
  std::vector<int> order_;
};

// Uniform permutation of [0, B) via Fisher-Yates; fresh per (client,
// cycle-epoch) stream in SSGD mode.
std::vector<int> draw_permutation(int b, RngStream rng);

// Global round t (0-based) -> (cycle-epoch k, round-in-cycle i), 1-based.
std::pair<int, int> round_to_indices(int t, int k_bar);

}  // namespace cycfed
