#include "ccf/parameter_store.hpp"

#include "ccf/rng.hpp"

namespace ccf {

std::uint64_t hash_index(ParamKind kind, const EntityId& id, int component, int bits) {
  // FNV-1a 64-bit
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto eat = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  eat(static_cast<std::uint8_t>(kind));
  for (const char c : id) {
    eat(static_cast<std::uint8_t>(c));
  }
  eat(0x00);
  const auto comp = static_cast<std::uint32_t>(component);
  eat(static_cast<std::uint8_t>(comp & 0xff));
  eat(static_cast<std::uint8_t>((comp >> 8) & 0xff));
  eat(static_cast<std::uint8_t>((comp >> 16) & 0xff));
  eat(static_cast<std::uint8_t>((comp >> 24) & 0xff));
  return h & ((std::uint64_t{1} << bits) - 1);
}

ParameterStore ParameterStore::init(const std::set<EntityId>& users,
                                    const std::set<EntityId>& items, const InitConfig& config) {
  if (users.empty() || items.empty()) {
    throw ConfigError("init: user and item sets must be non-empty");
  }
  if (config.dim < 1) {
    throw ConfigError("init: dim must be >= 1");
  }
  if (config.scale < 0) {
    throw ConfigError("init: scale must be >= 0");
  }
  if (config.hash_bits && (*config.hash_bits < 1 || *config.hash_bits > 40)) {
    throw ConfigError("init: hash_bits must be in [1, 40]");
  }

  ParameterStore store;
  store.dim_ = config.dim;
  store.thresholds_enabled_ = config.thresholds;
  store.hash_bits_ = config.hash_bits;
  store.users_ = users;
  store.items_ = items;
  if (config.hash_bits) {
    store.hash_table_.assign(std::size_t{1} << *config.hash_bits, 0.0);
  }

  Rng rng(Rng::mix(config.seed, 0xA11C0DE));
  const auto draw_entity = [&](ParamKind kind, const EntityId& id) {
    for (int c = 0; c < config.dim; ++c) {
      const double v = rng.uniform(-config.scale, config.scale);
      store.set(ParamSlot{kind, id, c}, v);
    }
  };
  for (const auto& u : users) {
    draw_entity(ParamKind::UserFactor, u);
  }
  for (const auto& i : items) {
    draw_entity(ParamKind::ItemFactor, i);
  }
  if (config.thresholds) {
    for (const auto& u : users) {
      store.set(ParamSlot{ParamKind::Threshold, u, 0}, 0.0);
    }
  }
  return store;
}

const std::vector<double>& ParameterStore::plain_vector(ParamKind kind, const EntityId& id) const {
  const auto& factors = kind == ParamKind::UserFactor ? user_factors_ : item_factors_;
  const auto it = factors.find(id);
  if (it == factors.end()) {
    throw MissingEntityError("unknown " +
                             std::string(kind == ParamKind::UserFactor ? "user" : "item") +
                             " id '" + id + "' (hashing disabled)");
  }
  return it->second;
}

double ParameterStore::utility(const EntityId& u, const EntityId& i) const {
  if (hash_bits_) {
    double sum = 0.0;
    for (int c = 0; c < dim_; ++c) {
      sum += hash_table_[hash_index(ParamKind::UserFactor, u, c, *hash_bits_)] *
             hash_table_[hash_index(ParamKind::ItemFactor, i, c, *hash_bits_)];
    }
    return sum;
  }
  const auto& pu = plain_vector(ParamKind::UserFactor, u);
  const auto& pi = plain_vector(ParamKind::ItemFactor, i);
  double sum = 0.0;
  for (int c = 0; c < dim_; ++c) {
    sum += pu[c] * pi[c];
  }
  return sum;
}

double ParameterStore::utility_with_content(const ContentFeatures& feats, const EntityId& u,
                                            const EntityId& i) const {
  if (!has_content_matrix()) {
    throw ConfigError("utility_with_content: no content matrix installed");
  }
  const auto fu = feats.user_features.find(u);
  const auto fi = feats.item_features.find(i);
  if (fu == feats.user_features.end() || fi == feats.item_features.end()) {
    throw MissingEntityError("content features missing for dyad (" + u + ", " + i + ")");
  }
  const auto& xu = fu->second;
  const auto& xi = fi->second;
  if (static_cast<int>(xu.size()) != content_rows_ || static_cast<int>(xi.size()) != content_cols_) {
    throw ShapeError("content feature lengths do not match the content matrix");
  }
  double bilinear = 0.0;
  for (int a = 0; a < content_rows_; ++a) {
    double row = 0.0;
    for (int b = 0; b < content_cols_; ++b) {
      row += content_[static_cast<std::size_t>(a) * content_cols_ + b] * xi[b];
    }
    bilinear += xu[a] * row;
  }
  return utility(u, i) + bilinear;
}

std::vector<double> ParameterStore::user_vector(const EntityId& u) const {
  std::vector<double> v(dim_);
  for (int c = 0; c < dim_; ++c) {
    v[c] = get(ParamSlot{ParamKind::UserFactor, u, c});
  }
  return v;
}

std::vector<double> ParameterStore::item_vector(const EntityId& i) const {
  std::vector<double> v(dim_);
  for (int c = 0; c < dim_; ++c) {
    v[c] = get(ParamSlot{ParamKind::ItemFactor, i, c});
  }
  return v;
}

double ParameterStore::threshold(const EntityId& u) const {
  if (!thresholds_enabled_) {
    throw ConfigError("thresholds are not enabled on this store");
  }
  return get(ParamSlot{ParamKind::Threshold, u, 0});
}

double ParameterStore::get(const ParamSlot& slot) const {
  if (hash_bits_) {
    return hash_table_[hash_index(slot.kind, slot.id, slot.component, *hash_bits_)];
  }
  if (slot.kind == ParamKind::Threshold) {
    const auto it = thresholds_.find(slot.id);
    if (it == thresholds_.end()) {
      throw MissingEntityError("unknown threshold user id '" + slot.id + "'");
    }
    return it->second;
  }
  return plain_vector(slot.kind, slot.id).at(slot.component);
}

void ParameterStore::set(const ParamSlot& slot, double value) {
  if (hash_bits_) {
    hash_table_[hash_index(slot.kind, slot.id, slot.component, *hash_bits_)] = value;
    return;
  }
  if (slot.kind == ParamKind::Threshold) {
    thresholds_[slot.id] = value;
    return;
  }
  auto& factors = slot.kind == ParamKind::UserFactor ? user_factors_ : item_factors_;
  auto& vec = factors[slot.id];
  if (vec.empty()) {
    vec.assign(dim_, 0.0);
  }
  vec.at(slot.component) = value;
}

void ParameterStore::add(const ParamSlot& slot, double delta) {
  if (hash_bits_) {
    hash_table_[hash_index(slot.kind, slot.id, slot.component, *hash_bits_)] += delta;
    return;
  }
  if (slot.kind == ParamKind::Threshold) {
    auto it = thresholds_.find(slot.id);
    if (it == thresholds_.end()) {
      throw MissingEntityError("unknown threshold user id '" + slot.id + "'");
    }
    it->second += delta;
    return;
  }
  auto& factors = slot.kind == ParamKind::UserFactor ? user_factors_ : item_factors_;
  const auto it = factors.find(slot.id);
  if (it == factors.end()) {
    throw MissingEntityError("unknown " +
                             std::string(slot.kind == ParamKind::UserFactor ? "user" : "item") +
                             " id '" + slot.id + "' (hashing disabled)");
  }
  it->second.at(slot.component) += delta;
}

void ParameterStore::set_user_vector(const EntityId& u, std::span<const double> v) {
  if (static_cast<int>(v.size()) != dim_) {
    throw ShapeError("user vector length != dim");
  }
  users_.insert(u);
  for (int c = 0; c < dim_; ++c) {
    set(ParamSlot{ParamKind::UserFactor, u, c}, v[c]);
  }
}

void ParameterStore::set_item_vector(const EntityId& i, std::span<const double> v) {
  if (static_cast<int>(v.size()) != dim_) {
    throw ShapeError("item vector length != dim");
  }
  items_.insert(i);
  for (int c = 0; c < dim_; ++c) {
    set(ParamSlot{ParamKind::ItemFactor, i, c}, v[c]);
  }
}

void ParameterStore::set_threshold(const EntityId& u, double theta) {
  thresholds_enabled_ = true;
  set(ParamSlot{ParamKind::Threshold, u, 0}, theta);
}

double ParameterStore::content_at(int row, int col) const {
  return content_.at(static_cast<std::size_t>(row) * content_cols_ + col);
}

void ParameterStore::set_content_matrix(int rows, int cols, std::span<const double> row_major) {
  if (rows < 1 || cols < 1 || row_major.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("content matrix payload does not match rows x cols");
  }
  content_rows_ = rows;
  content_cols_ = cols;
  content_.assign(row_major.begin(), row_major.end());
}

ParameterStore ParameterStore::average(const std::vector<ParameterStore>& stores) {
  if (stores.empty()) {
    throw ConfigError("average: no stores given");
  }
  ParameterStore out = stores.front();
  const double inv = 1.0 / static_cast<double>(stores.size());
  // mean = v0 + sum(vj - v0)/n, so averaging identical copies is exact.
  const auto mean_at = [&](double base, auto&& value_of) {
    double delta = 0.0;
    for (std::size_t s = 1; s < stores.size(); ++s) {
      delta += value_of(stores[s]) - base;
    }
    return base + delta * inv;
  };
  for (auto& [id, vec] : out.user_factors_) {
    for (std::size_t c = 0; c < vec.size(); ++c) {
      vec[c] = mean_at(vec[c], [&, &id = id, c](const ParameterStore& s) {
        return s.user_factors_.at(id)[c];
      });
    }
  }
  for (auto& [id, vec] : out.item_factors_) {
    for (std::size_t c = 0; c < vec.size(); ++c) {
      vec[c] = mean_at(vec[c], [&, &id = id, c](const ParameterStore& s) {
        return s.item_factors_.at(id)[c];
      });
    }
  }
  for (auto& [id, theta] : out.thresholds_) {
    theta = mean_at(theta,
                    [&, &id = id](const ParameterStore& s) { return s.thresholds_.at(id); });
  }
  for (std::size_t j = 0; j < out.hash_table_.size(); ++j) {
    out.hash_table_[j] =
        mean_at(out.hash_table_[j], [j](const ParameterStore& s) { return s.hash_table_[j]; });
  }
  for (std::size_t j = 0; j < out.content_.size(); ++j) {
    out.content_[j] =
        mean_at(out.content_[j], [j](const ParameterStore& s) { return s.content_[j]; });
  }
  return out;
}

}  // namespace ccf
