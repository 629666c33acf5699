#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>

#include "ccf/parameter_store.hpp"
#include "ccf/types.hpp"

namespace ccf {

/// Dyadic file: one `user<TAB>item` per line, `#` comments, duplicates
/// rejected. Every referenced id enters the universes.
DyadicDataset parse_dyadic(const std::filesystem::path& path);

/// Session file: `user<TAB>offer,ids<TAB>decision,ids` with `-` for an empty
/// decision set.
SessionDataset parse_sessions(const std::filesystem::path& path);

void write_dyadic(const std::filesystem::path& path, const DyadicDataset& dataset);
void write_sessions(const std::filesystem::path& path, const SessionDataset& dataset);

/// Builds one pseudo session per action dyad: the positive item plus m items
/// sampled uniformly (without replacement) from the items that user never
/// acted on anywhere in the dataset; offer order is shuffled.
SessionDataset simulate_contexts(const DyadicDataset& dyads, int m, std::uint64_t seed);

/// Record-level three-way partition. Ratios must be >= 0 and sum to 1;
/// counts follow the largest-remainder rule so divisible splits are exact.
/// Each piece keeps the parent's full universes.
template <class Record>
std::array<Dataset<Record>, 3> split(const Dataset<Record>& dataset,
                                     const std::array<double, 3>& ratios, std::uint64_t seed);

/// Deduplicated (user, chosen item) action dyads of every responded session,
/// labelled +1. This is exactly the view of the data a CF baseline trains on.
DyadicDataset extract_positive_dyads(const SessionDataset& sessions);

/// Positives (+1) plus each session's non-chosen offers as sampled negatives
/// with the given label (-1 logistic convention, 0 l2 convention). A dyad that
/// appears both ways stays positive.
DyadicDataset extract_dyads_with_context_negatives(const SessionDataset& sessions,
                                                   double negative_label);

struct SynthConfig {
  int dim = 5;
  int n_users = 100;
  int n_items = 50;
  int sessions_per_user = 10;
  int offer_size = 10;
  bool thresholds = false;
  /// Per-component stddev of the true factors. Default sqrt(2)/k^(1/4)
  /// (component variance 2/sqrt(k)), which keeps the utility variance at 4
  /// for every k.
  std::optional<double> factor_sigma;
  std::uint64_t seed = 0;

  double sigma() const;
  void validate() const;
};

struct SyntheticGroundTruth {
  ParameterStore store;  // the true factors (and thresholds when enabled)
  SynthConfig config;
};

/// Draws a ground-truth world with i.i.d. normal factors, then samples
/// sessions whose choices follow the exact multinomial logit over each
/// uniformly drawn offer set (including the no-response outcome when
/// thresholds are enabled).
std::pair<SyntheticGroundTruth, SessionDataset> synth_generate(const SynthConfig& config);

}  // namespace ccf
