#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "ccf/types.hpp"

namespace ccf {

/// Observable per-entity feature vectors for the bilinear content extension.
struct ContentFeatures {
  std::map<EntityId, std::vector<double>> user_features;  // all length m
  std::map<EntityId, std::vector<double>> item_features;  // all length n
};

/// Deterministic slot index for hashed parameter storage: FNV-1a 64-bit over
/// the byte string  [kind tag byte | id bytes | 0x00 | component as 4-byte LE],
/// masked to the low `bits` bits. Total on valid input, 1 <= bits <= 40.
std::uint64_t hash_index(ParamKind kind, const EntityId& id, int component, int bits);

struct InitConfig {
  int dim = 10;
  double scale = 0.01;
  std::uint64_t seed = 0;
  bool thresholds = false;
  std::optional<int> hash_bits;
};

/// All learnable values: user/item factors (k each), optional per-user action
/// thresholds, optional content matrix. Storage is either per-entity vectors
/// or, when hash_bits is set, one flat table shared by all kinds with
/// collisions allowed. Plain value type: copy to clone, no hidden sharing.
class ParameterStore {
 public:
  ParameterStore() = default;

  /// Factors drawn i.i.d. uniform[-scale, +scale] from the given seed, users
  /// first then items, each in sorted id order; thresholds start at 0.
  /// With hashing the same draw sequence is scattered into the table, so a
  /// collision-free hashed store matches the plain one exactly.
  static ParameterStore init(const std::set<EntityId>& users, const std::set<EntityId>& items,
                             const InitConfig& config);

  int dim() const { return dim_; }
  bool thresholds_enabled() const { return thresholds_enabled_; }
  bool hashing_enabled() const { return hash_bits_.has_value(); }
  int hash_bits() const { return hash_bits_.value(); }

  const std::set<EntityId>& users() const { return users_; }
  const std::set<EntityId>& items() const { return items_; }
  bool has_user(const EntityId& u) const { return users_.count(u) > 0; }
  bool has_item(const EntityId& i) const { return items_.count(i) > 0; }

  /// r(u, i) = phi_u . phi_i
  double utility(const EntityId& u, const EntityId& i) const;

  /// r(u, i) = phi_u . phi_i + x_u^T M x_i
  double utility_with_content(const ContentFeatures& feats, const EntityId& u,
                              const EntityId& i) const;

  /// Gathered k-vector (copies out of the hash table when hashing).
  std::vector<double> user_vector(const EntityId& u) const;
  std::vector<double> item_vector(const EntityId& i) const;
  double threshold(const EntityId& u) const;

  double get(const ParamSlot& slot) const;
  void set(const ParamSlot& slot, double value);
  void add(const ParamSlot& slot, double delta);

  void set_user_vector(const EntityId& u, std::span<const double> v);
  void set_item_vector(const EntityId& i, std::span<const double> v);
  void set_threshold(const EntityId& u, double theta);

  bool has_content_matrix() const { return content_rows_ > 0; }
  int content_rows() const { return content_rows_; }
  int content_cols() const { return content_cols_; }
  double content_at(int row, int col) const;
  /// Installs an m x n matrix (row-major).
  void set_content_matrix(int rows, int cols, std::span<const double> row_major);

  const std::vector<double>& hash_table() const { return hash_table_; }

  /// Element-wise mean of several same-shape stores. Used by the shard
  /// trainer's reduce step; summation runs in the given order.
  static ParameterStore average(const std::vector<ParameterStore>& stores);

 private:
  const std::vector<double>& plain_vector(ParamKind kind, const EntityId& id) const;

  int dim_ = 0;
  bool thresholds_enabled_ = false;
  std::optional<int> hash_bits_;

  std::set<EntityId> users_;
  std::set<EntityId> items_;

  // Plain storage (hashing disabled).
  std::map<EntityId, std::vector<double>> user_factors_;
  std::map<EntityId, std::vector<double>> item_factors_;
  std::map<EntityId, double> thresholds_;

  // Hashed storage (hashing enabled): one table, kind-tagged keys.
  std::vector<double> hash_table_;

  int content_rows_ = 0;
  int content_cols_ = 0;
  std::vector<double> content_;  // row-major

  friend class Checkpoint;
};

}  // namespace ccf
