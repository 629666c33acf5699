#include "ccf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccf {

namespace {

double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t hits_in_top_n(const std::vector<EntityId>& ranking, const std::set<EntityId>& truth,
                          int n) {
  std::size_t hits = 0;
  const std::size_t depth = std::min(ranking.size(), static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < depth; ++p) {
    hits += truth.count(ranking[p]);
  }
  return hits;
}

// Shared walk for the three list metrics: fn(ranking, truth) -> per-user value.
template <class Fn>
double mean_over_users(const UserRankings& rankings, const UserItemSets& ground_truth, Fn&& fn) {
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (const auto& [user, ranking] : rankings) {
    const auto it = ground_truth.find(user);
    if (it == ground_truth.end() || it->second.empty()) {
      continue;
    }
    sum += fn(ranking, it->second);
    ++evaluated;
  }
  if (evaluated == 0) {
    throw DataError("no user has a non-empty ground-truth set");
  }
  return sum / static_cast<double>(evaluated);
}

}  // namespace

std::vector<EntityId> rank_top_n(const ParameterStore& store, const EntityId& u,
                                 std::span<const EntityId> candidates, int n) {
  if (n < 1) {
    throw ConfigError("rank_top_n: n must be >= 1");
  }
  if (candidates.empty()) {
    throw ConfigError("rank_top_n: empty candidate list");
  }
  std::vector<std::pair<double, const EntityId*>> scored;
  scored.reserve(candidates.size());
  for (const auto& item : candidates) {
    scored.emplace_back(store.utility(u, item), &item);
  }
  const auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return a.first > b.first;
    }
    return *a.second < *b.second;
  };
  const std::size_t depth = std::min(scored.size(), static_cast<std::size_t>(n));
  std::partial_sort(scored.begin(), scored.begin() + depth, scored.end(), better);
  std::vector<EntityId> top;
  top.reserve(depth);
  for (std::size_t p = 0; p < depth; ++p) {
    top.push_back(*scored[p].second);
  }
  return top;
}

double ap_at_n(const UserRankings& rankings, const UserItemSets& ground_truth, int n) {
  return mean_over_users(rankings, ground_truth, [n](const auto& ranking, const auto& truth) {
    return static_cast<double>(hits_in_top_n(ranking, truth, n)) / static_cast<double>(n);
  });
}

double ar_at_n(const UserRankings& rankings, const UserItemSets& ground_truth, int n) {
  return mean_over_users(rankings, ground_truth, [n](const auto& ranking, const auto& truth) {
    return static_cast<double>(hits_in_top_n(ranking, truth, n)) /
           static_cast<double>(truth.size());
  });
}

double ndcg_at_n(const UserRankings& rankings, const UserItemSets& ground_truth, int n) {
  return mean_over_users(rankings, ground_truth, [n](const auto& ranking, const auto& truth) {
    double dcg = 0.0;
    const std::size_t depth = std::min(ranking.size(), static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < depth; ++p) {
      if (truth.count(ranking[p])) {
        dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
      }
    }
    double ideal = 0.0;
    const std::size_t ideal_depth = std::min(truth.size(), static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < ideal_depth; ++p) {
      ideal += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
    return dcg / ideal;
  });
}

double online_accuracy(const ParameterStore& store, const SessionDataset& sessions) {
  if (sessions.empty()) {
    throw DataError("online_accuracy: no sessions");
  }
  std::size_t correct = 0;
  for (const auto& session : sessions.records) {
    if (session.decision_set.size() > 1) {
      throw WrongLossError("online_accuracy: session has more than one decision");
    }
    if (session.decision_set.empty() && !store.thresholds_enabled()) {
      throw WrongLossError(
          "online_accuracy: no-response session needs a threshold-enabled model");
    }
    const EntityId* best = nullptr;
    double best_score = 0.0;
    for (const auto& item : session.offer_set) {
      const double score = store.utility(session.user, item);
      if (best == nullptr || score > best_score || (score == best_score && item < *best)) {
        best = &item;
        best_score = score;
      }
    }
    const bool predict_none =
        store.thresholds_enabled() && store.threshold(session.user) > best_score;
    if (session.decision_set.empty()) {
      correct += predict_none;
    } else {
      correct += !predict_none && *best == session.decision_set.front();
    }
  }
  return static_cast<double>(correct) / static_cast<double>(sessions.size());
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram score_histogram(const ParameterStore& store,
                          std::span<const std::pair<EntityId, EntityId>> dyads,
                          ScoreTransform transform, int buckets) {
  if (buckets < 2) {
    throw ConfigError("score_histogram: buckets must be >= 2");
  }
  if (dyads.empty()) {
    throw DataError("score_histogram: empty dyad sample");
  }
  std::vector<double> scores;
  scores.reserve(dyads.size());
  for (const auto& [u, i] : dyads) {
    const double r = store.utility(u, i);
    scores.push_back(transform == ScoreTransform::Sigmoid ? sigmoid(r) : r);
  }
  double lo = 0.0;
  double hi = 1.0;
  if (transform == ScoreTransform::Raw) {
    const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
    lo = *mn;
    hi = *mx > *mn ? *mx : *mn + 1.0;  // degenerate all-equal sample
  }
  Histogram hist;
  hist.bucket_width = (hi - lo) / buckets;
  hist.counts.assign(buckets, 0);
  for (int b = 0; b < buckets; ++b) {
    hist.lower_bounds.push_back(lo + b * hist.bucket_width);
  }
  for (const double s : scores) {
    auto b = static_cast<std::size_t>((s - lo) / hist.bucket_width);
    b = std::min(b, static_cast<std::size_t>(buckets - 1));
    ++hist.counts[b];
  }
  return hist;
}

EvalReport offline_report(const ParameterStore& store, const UserItemSets& ground_truth, int n,
                          const UserItemSets* excluded) {
  EvalReport report;
  report.n = n;
  const std::vector<EntityId> universe(store.items().begin(), store.items().end());
  UserRankings rankings;
  for (const auto& [user, truth] : ground_truth) {
    if (truth.empty()) {
      ++report.users_skipped;
      continue;
    }
    const std::set<EntityId>* ex = nullptr;
    if (excluded != nullptr) {
      const auto it = excluded->find(user);
      if (it != excluded->end()) {
        ex = &it->second;
      }
    }
    std::vector<EntityId> candidates;
    if (ex == nullptr) {
      candidates = universe;
    } else {
      for (const auto& item : universe) {
        if (!ex->count(item)) {
          candidates.push_back(item);
        }
      }
    }
    if (candidates.empty()) {  // every item excluded for this user
      ++report.users_skipped;
      continue;
    }
    rankings[user] = rank_top_n(store, user, candidates, n);
    ++report.users_evaluated;
  }
  report.ap = ap_at_n(rankings, ground_truth, n);
  report.ar = ar_at_n(rankings, ground_truth, n);
  report.ndcg = ndcg_at_n(rankings, ground_truth, n);
  return report;
}

}  // namespace ccf
