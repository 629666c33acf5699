#include "ccf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

namespace ccf {

namespace {

std::uint64_t epoch_seed(const TrainConfig& config, int epoch, int shard) {
  return Rng::mix(Rng::mix(config.seed, 0xE70C5500ULL + static_cast<std::uint64_t>(epoch)),
                  0x5A4D0000ULL + static_cast<std::uint64_t>(shard));
}

void add_decay(GradientAccumulator& acc, const ParameterStore& store, ParamKind kind,
               const EntityId& id, double lambda) {
  if (lambda == 0.0) {
    return;
  }
  for (int c = 0; c < store.dim(); ++c) {
    const ParamSlot slot{kind, id, c};
    acc.add(kind, id, c, lambda * store.get(slot));
  }
}

void apply(const GradientAccumulator& acc, ParameterStore& store, double lr) {
  for (const auto& [slot, g] : acc.partials) {
    store.add(slot, -lr * g);
  }
}

double penalty(const ParameterStore& store, const TrainConfig& config) {
  double total = 0.0;
  for (const auto& u : store.users()) {
    const auto v = store.user_vector(u);
    total += config.reg_user * std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
  }
  for (const auto& i : store.items()) {
    const auto v = store.item_vector(i);
    total += config.reg_item * std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
  }
  return total;
}

template <class Record>
void check_record_kind(const TrainConfig& config) {
  constexpr bool session = std::is_same_v<Record, Session>;
  if (session != config.loss.session_based()) {
    throw WrongLossError("loss '" + config.loss.name() + "' cannot train on " +
                         (session ? "session" : "dyadic") + " records");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (lr0 <= 0) throw ConfigError("lr0 must be > 0");
  if (anneal <= 0 || anneal > 1) throw ConfigError("anneal must be in (0, 1]");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (shards < 1) throw ConfigError("shards must be >= 1");
  if (reg_user < 0 || reg_item < 0) throw ConfigError("regularization weights must be >= 0");
  if (loss.tradeoff_c < 0) throw ConfigError("trade-off C must be >= 0");
  if (loss.smooth_slope <= 0) throw ConfigError("smooth_slope must be > 0");
  if (init_scale < 0) throw ConfigError("init_scale must be >= 0");
}

double TrainConfig::lr_at(int epoch) const {
  return lr0 * std::pow(anneal, static_cast<double>(epoch));
}

void sgd_step(const Session& session, ParameterStore& store, const TrainConfig& config,
              double lr) {
  GradientAccumulator acc = record_grad(config.loss, session, store);
  add_decay(acc, store, ParamKind::UserFactor, session.user, config.reg_user);
  for (const auto& item : session.offer_set) {
    add_decay(acc, store, ParamKind::ItemFactor, item, config.reg_item);
  }
  apply(acc, store, lr);
}

void sgd_step(const DyadObservation& obs, ParameterStore& store, const TrainConfig& config,
              double lr) {
  GradientAccumulator acc = record_grad(config.loss, obs, store);
  add_decay(acc, store, ParamKind::UserFactor, obs.user, config.reg_user);
  add_decay(acc, store, ParamKind::ItemFactor, obs.item, config.reg_item);
  apply(acc, store, lr);
}

template <class Record>
void train_epoch(std::span<const Record> records, ParameterStore& store,
                 const TrainConfig& config, double lr, Rng& rng) {
  if (records.empty()) {
    throw ConfigError("train_epoch: empty record list");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (const std::size_t idx : order) {
    sgd_step(records[idx], store, config, lr);
  }
}

template <class Record>
double full_objective(std::span<const Record> records, const ParameterStore& store,
                      const TrainConfig& config) {
  double total = 0.0;
  for (const auto& record : records) {
    total += record_loss(config.loss, record, store);
  }
  return total + penalty(store, config);
}

template <class Record>
TrainResult train(const Dataset<Record>& dataset, const TrainConfig& config) {
  config.validate();
  check_record_kind<Record>(config);
  if (dataset.empty()) {
    throw ConfigError("train: empty dataset");
  }
  TrainResult result;
  result.store = ParameterStore::init(
      dataset.users, dataset.items,
      InitConfig{config.dim, config.init_scale, config.seed,
                 config.loss.needs_thresholds(), config.hash_bits});
  const std::span<const Record> records(dataset.records);
  for (int e = 0; e < config.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = config.lr_at(e);
    Rng rng(epoch_seed(config, e, 0));
    train_epoch(records, result.store, config, lr, rng);
    result.report.objectives.push_back(full_objective(records, result.store, config));
    result.report.final_lr = lr;
    result.report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return result;
}

template <class Record>
TrainResult sharded_train(const Dataset<Record>& dataset, const TrainConfig& config) {
  config.validate();
  check_record_kind<Record>(config);
  if (dataset.empty()) {
    throw ConfigError("sharded_train: empty dataset");
  }
  if (static_cast<std::size_t>(config.shards) > dataset.size()) {
    throw ConfigError("sharded_train: more shards than records");
  }
  if (config.shards == 1) {
    return train(dataset, config);
  }

  const std::size_t n = dataset.size();
  const auto shards = static_cast<std::size_t>(config.shards);
  std::vector<std::span<const Record>> blocks;
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t lo = s * n / shards;
    const std::size_t hi = (s + 1) * n / shards;
    blocks.emplace_back(dataset.records.data() + lo, hi - lo);
  }

  TrainResult result;
  result.store = ParameterStore::init(
      dataset.users, dataset.items,
      InitConfig{config.dim, config.init_scale, config.seed,
                 config.loss.needs_thresholds(), config.hash_bits});
  for (int e = 0; e < config.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = config.lr_at(e);
    std::vector<ParameterStore> copies(shards, result.store);
    std::vector<std::thread> workers;
    workers.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s) {
      workers.emplace_back([&, s] {
        Rng rng(epoch_seed(config, e, static_cast<int>(s)));
        train_epoch(blocks[s], copies[s], config, lr, rng);
      });
    }
    for (auto& w : workers) {
      w.join();
    }
    result.store = ParameterStore::average(copies);
    result.report.objectives.push_back(
        full_objective(std::span<const Record>(dataset.records), result.store, config));
    result.report.final_lr = lr;
    result.report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return result;
}

template void train_epoch<Session>(std::span<const Session>, ParameterStore&, const TrainConfig&,
                                   double, Rng&);
template void train_epoch<DyadObservation>(std::span<const DyadObservation>, ParameterStore&,
                                           const TrainConfig&, double, Rng&);
template double full_objective<Session>(std::span<const Session>, const ParameterStore&,
                                        const TrainConfig&);
template double full_objective<DyadObservation>(std::span<const DyadObservation>,
                                                const ParameterStore&, const TrainConfig&);
template TrainResult train<Session>(const SessionDataset&, const TrainConfig&);
template TrainResult train<DyadObservation>(const DyadicDataset&, const TrainConfig&);
template TrainResult sharded_train<Session>(const SessionDataset&, const TrainConfig&);
template TrainResult sharded_train<DyadObservation>(const DyadicDataset&, const TrainConfig&);

}  // namespace ccf
