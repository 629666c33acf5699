#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccf/errors.hpp"

namespace ccf {

/// Ids are opaque tokens (decimal ints are just one spelling). Ordering,
/// where a tie-break or canonical file order is needed, is lexicographic.
using EntityId = std::string;

enum class ParamKind : std::uint8_t { UserFactor = 0, ItemFactor = 1, Threshold = 2 };

/// Address of one learnable scalar: (kind, entity, component).
/// Thresholds use component 0.
struct ParamSlot {
  ParamKind kind;
  EntityId id;
  int component = 0;

  friend auto operator<=>(const ParamSlot&, const ParamSlot&) = default;
};

/// Sparse per-record gradient. Absent slot = zero partial.
struct GradientAccumulator {
  std::map<ParamSlot, double> partials;

  void add(ParamKind kind, const EntityId& id, int component, double value) {
    partials[ParamSlot{kind, id, component}] += value;
  }

  double at_or_zero(ParamKind kind, const EntityId& id, int component) const {
    const auto it = partials.find(ParamSlot{kind, id, component});
    return it == partials.end() ? 0.0 : it->second;
  }

  std::size_t size() const { return partials.size(); }
};

/// One user-recommender interaction: the items offered and the (possibly
/// empty) subset acted on.
struct Session {
  EntityId user;
  std::vector<EntityId> offer_set;
  std::vector<EntityId> decision_set;

  bool responded() const { return !decision_set.empty(); }

  /// Throws DataError on duplicate offers, duplicate decisions, or a
  /// decision outside the offer set. `where` prefixes the message.
  void validate(const std::string& where = "") const;
};

/// One dyadic observation (u, i, y). Action dyads carry label +1; sampled
/// negatives carry -1 (logistic convention) or 0 (l2 convention).
struct DyadObservation {
  EntityId user;
  EntityId item;
  double label = 1.0;
};

template <class Record>
struct Dataset {
  std::vector<Record> records;
  std::set<EntityId> users;
  std::set<EntityId> items;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

using SessionDataset = Dataset<Session>;
using DyadicDataset = Dataset<DyadObservation>;

}  // namespace ccf
