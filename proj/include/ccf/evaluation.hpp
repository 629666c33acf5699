#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "ccf/parameter_store.hpp"
#include "ccf/types.hpp"

namespace ccf {

/// The n highest-utility candidates for u, descending; utility ties break
/// toward the lexicographically smaller item id, so the order is total.
std::vector<EntityId> rank_top_n(const ParameterStore& store, const EntityId& u,
                                 std::span<const EntityId> candidates, int n);

using UserRankings = std::map<EntityId, std::vector<EntityId>>;
using UserItemSets = std::map<EntityId, std::set<EntityId>>;

/// Mean over users of |top-n intersect truth| / n. Users whose truth set is
/// empty or missing are excluded from the mean.
double ap_at_n(const UserRankings& rankings, const UserItemSets& ground_truth, int n);

/// Mean over users of |top-n intersect truth| / |truth|.
double ar_at_n(const UserRankings& rankings, const UserItemSets& ground_truth, int n);

/// Binary-gain DCG with 1/log2(p+1) discounts, normalized by the ideal DCG
/// for |truth| relevant items, then averaged over users.
double ndcg_at_n(const UserRankings& rankings, const UserItemSets& ground_truth, int n);

/// Fraction of sessions whose highest-utility offer is the decision. With
/// thresholds enabled, a theta_u above every offer utility predicts
/// "no response", which scores a no-response session as correct.
double online_accuracy(const ParameterStore& store, const SessionDataset& sessions);

enum class ScoreTransform { Raw, Sigmoid };

struct Histogram {
  std::vector<double> lower_bounds;
  std::vector<std::size_t> counts;
  double bucket_width = 0.0;

  std::size_t total() const;
};

/// Equal-width bucket counts of (transformed) scores over the sampled dyads.
/// Sigmoid scores bucket over [0, 1]; raw scores over [min, max].
Histogram score_histogram(const ParameterStore& store,
                          std::span<const std::pair<EntityId, EntityId>> dyads,
                          ScoreTransform transform, int buckets);

struct EvalReport {
  double ap = 0.0;
  double ar = 0.0;
  double ndcg = 0.0;
  int n = 0;
  int users_evaluated = 0;
  int users_skipped = 0;
  std::optional<double> online_accuracy;
  std::optional<Histogram> histogram;
};

/// Offline top-k protocol: for every user with ground truth, rank the store's
/// item universe (minus that user's excluded items, usually their training
/// positives) and compute the three metrics. Aggregation iterates users in
/// sorted order, so results do not depend on construction order.
EvalReport offline_report(const ParameterStore& store, const UserItemSets& ground_truth, int n,
                          const UserItemSets* excluded = nullptr);

}  // namespace ccf
