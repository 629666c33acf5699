#pragma once

// Test-only helpers. The oracles here recompute quantities by routes that are
// independent of the library implementation (direct enumeration, central
// finite differences, full sorts), so they can vouch for it.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccf/data.hpp"
#include "ccf/objectives.hpp"
#include "ccf/parameter_store.hpp"
#include "ccf/rng.hpp"
#include "ccf/types.hpp"

namespace ccf::testing {

inline std::set<EntityId> make_ids(const std::string& prefix, int count) {
  std::set<EntityId> ids;
  for (int j = 0; j < count; ++j) {
    ids.insert(prefix + std::to_string(j));
  }
  return ids;
}

inline ParameterStore random_store(int n_users, int n_items, int dim, double scale,
                                   std::uint64_t seed, bool thresholds = false) {
  auto store = ParameterStore::init(make_ids("u", n_users), make_ids("i", n_items),
                                    InitConfig{dim, scale, seed, thresholds, std::nullopt});
  if (thresholds) {
    Rng rng(Rng::mix(seed, 0x7474));
    for (const auto& u : store.users()) {
      store.set_threshold(u, rng.uniform(-1.0, 1.0));
    }
  }
  return store;
}

inline Session random_session(const ParameterStore& store, Rng& rng, std::size_t offer_size,
                              std::size_t n_decisions = 1) {
  const std::vector<EntityId> users(store.users().begin(), store.users().end());
  const std::vector<EntityId> items(store.items().begin(), store.items().end());
  Session session;
  session.user = users[rng.index(users.size())];
  std::set<EntityId> drawn;
  while (session.offer_set.size() < offer_size) {
    const auto& candidate = items[rng.index(items.size())];
    if (drawn.insert(candidate).second) {
      session.offer_set.push_back(candidate);
    }
  }
  std::vector<std::size_t> order(offer_size);
  for (std::size_t j = 0; j < offer_size; ++j) {
    order[j] = j;
  }
  rng.shuffle(order);
  for (std::size_t d = 0; d < n_decisions; ++d) {
    session.decision_set.push_back(session.offer_set[order[d]]);
  }
  return session;
}

// --- enumeration / direct-formula oracles -------------------------------

inline double enum_softmax_loss(const Session& session, const ParameterStore& store) {
  double total = 0.0;
  for (const auto& chosen : session.decision_set) {
    double z = 0.0;
    for (const auto& item : session.offer_set) {
      z += std::exp(store.utility(session.user, item));
    }
    total += -std::log(std::exp(store.utility(session.user, chosen)) / z);
  }
  return total;
}

inline double direct_hinge_loss(const Session& session, const ParameterStore& store) {
  double total = 0.0;
  for (const auto& chosen : session.decision_set) {
    const double r_star = store.utility(session.user, chosen);
    double others = 0.0;
    for (const auto& item : session.offer_set) {
      if (item != chosen) {
        others += store.utility(session.user, item);
      }
    }
    others /= static_cast<double>(session.offer_set.size() - 1);
    total += std::max(0.0, 1.0 - r_star + others);
  }
  return total;
}

// --- finite differences --------------------------------------------------

/// Central finite differences of loss_fn over exactly the slots the analytic
/// gradient names.
template <class LossFn>
std::map<ParamSlot, double> finite_diff(const ParameterStore& store,
                                        const GradientAccumulator& analytic, LossFn&& loss_fn,
                                        double h = 1e-5) {
  std::map<ParamSlot, double> out;
  for (const auto& [slot, unused] : analytic.partials) {
    (void)unused;
    ParameterStore probe = store;
    const double v = probe.get(slot);
    probe.set(slot, v + h);
    const double up = loss_fn(probe);
    probe.set(slot, v - h);
    const double down = loss_fn(probe);
    out[slot] = (up - down) / (2.0 * h);
  }
  return out;
}

/// Largest violation of |analytic - fd| <= rel_tol * max(|analytic|, |fd|)
/// + abs_floor, normalized so values < 1 pass. The absolute floor absorbs
/// finite-difference noise on near-zero partials.
template <class LossFn>
double max_grad_violation(const ParameterStore& store, const GradientAccumulator& analytic,
                          LossFn&& loss_fn, double rel_tol = 1e-3, double abs_floor = 1e-8,
                          double h = 1e-5) {
  const auto fd = finite_diff(store, analytic, loss_fn, h);
  double worst = 0.0;
  for (const auto& [slot, a] : analytic.partials) {
    const double f = fd.at(slot);
    const double allowed = rel_tol * std::max(std::abs(a), std::abs(f)) + abs_floor;
    worst = std::max(worst, std::abs(a - f) / allowed);
  }
  return worst;
}

// --- brute-force ranking/metric oracles ----------------------------------

inline std::vector<EntityId> bf_top_n(const ParameterStore& store, const EntityId& u,
                                      std::vector<EntityId> candidates, int n) {
  std::sort(candidates.begin(), candidates.end(), [&](const EntityId& a, const EntityId& b) {
    const double ra = store.utility(u, a);
    const double rb = store.utility(u, b);
    if (ra != rb) {
      return ra > rb;
    }
    return a < b;
  });
  if (candidates.size() > static_cast<std::size_t>(n)) {
    candidates.resize(n);
  }
  return candidates;
}

inline double bf_precision(const std::vector<EntityId>& ranking, const std::set<EntityId>& truth,
                           int n) {
  int hits = 0;
  for (int p = 0; p < n && p < static_cast<int>(ranking.size()); ++p) {
    hits += truth.count(ranking[p]) ? 1 : 0;
  }
  return static_cast<double>(hits) / n;
}

inline double bf_recall(const std::vector<EntityId>& ranking, const std::set<EntityId>& truth,
                        int n) {
  int hits = 0;
  for (int p = 0; p < n && p < static_cast<int>(ranking.size()); ++p) {
    hits += truth.count(ranking[p]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

inline double bf_ndcg(const std::vector<EntityId>& ranking, const std::set<EntityId>& truth,
                      int n) {
  double dcg = 0.0;
  for (int p = 0; p < n && p < static_cast<int>(ranking.size()); ++p) {
    if (truth.count(ranking[p])) {
      dcg += std::log(2.0) / std::log(static_cast<double>(p) + 2.0);
    }
  }
  double ideal = 0.0;
  for (int p = 0; p < n && p < static_cast<int>(truth.size()); ++p) {
    ideal += std::log(2.0) / std::log(static_cast<double>(p) + 2.0);
  }
  return dcg / ideal;
}

// --- scratch files --------------------------------------------------------

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("ccf_test_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path dir_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace ccf::testing
