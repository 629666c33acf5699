#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ccf/objectives.hpp"
#include "ccf/parameter_store.hpp"
#include "ccf/rng.hpp"
#include "ccf/types.hpp"

namespace ccf {

struct TrainConfig {
  LossKind loss;
  int dim = 10;
  double reg_user = 1e-4;
  double reg_item = 1e-4;
  double lr0 = 0.05;
  double anneal = 0.9;
  int epochs = 10;
  int shards = 1;
  std::uint64_t seed = 42;
  std::optional<int> hash_bits;
  double init_scale = 0.01;

  void validate() const;
  /// Learning rate used in epoch e (0-based): lr0 * anneal^e.
  double lr_at(int epoch) const;
};

struct TrainReport {
  std::vector<double> objectives;     // regularized full-data objective, one per epoch
  std::vector<double> epoch_seconds;  // wall clock, one per epoch
  double final_lr = 0.0;
};

struct TrainResult {
  ParameterStore store;
  TrainReport report;
};

/// One SGD update from a single record. All partials (including the weight
/// decay terms) are computed from pre-step values, then applied at once.
void sgd_step(const Session& session, ParameterStore& store, const TrainConfig& config, double lr);
void sgd_step(const DyadObservation& obs, ParameterStore& store, const TrainConfig& config,
              double lr);

/// Visits every record exactly once in an rng-shuffled order.
template <class Record>
void train_epoch(std::span<const Record> records, ParameterStore& store,
                 const TrainConfig& config, double lr, Rng& rng);

/// Sum of per-record losses plus the weight-decay penalties over every
/// stored factor vector.
template <class Record>
double full_objective(std::span<const Record> records, const ParameterStore& store,
                      const TrainConfig& config);

/// Sequential SGD: initializes parameters over the dataset universes, runs
/// config.epochs annealed epochs.
template <class Record>
TrainResult train(const Dataset<Record>& dataset, const TrainConfig& config);

/// Data-parallel variant: records are split into config.shards contiguous
/// blocks; each epoch every block trains on a private copy of the master
/// parameters and the copies are averaged element-wise back into the master.
/// shards=1 reproduces train() bit for bit.
template <class Record>
TrainResult sharded_train(const Dataset<Record>& dataset, const TrainConfig& config);

}  // namespace ccf
