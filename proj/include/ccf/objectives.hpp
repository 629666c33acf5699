#pragma once

#include <span>
#include <string>
#include <utility>

#include "ccf/parameter_store.hpp"
#include "ccf/types.hpp"

namespace ccf {

/// Which objective a trainer run optimizes, plus the knobs that only some
/// of them use: C weights non-response slacks (HingeExt only), smooth_slope
/// is the sigmoid slope standing in for the Heaviside step (hinge kinds).
struct LossKind {
  enum class Tag { Softmax, Hinge, SoftmaxExt, HingeExt, CfL2, CfLogistic };

  Tag tag = Tag::Softmax;
  double tradeoff_c = 1.0;
  double smooth_slope = 100.0;

  bool session_based() const {
    return tag == Tag::Softmax || tag == Tag::Hinge || tag == Tag::SoftmaxExt ||
           tag == Tag::HingeExt;
  }
  bool needs_thresholds() const { return tag == Tag::SoftmaxExt || tag == Tag::HingeExt; }

  static LossKind parse(const std::string& name);
  std::string name() const;
};

struct LossGrad {
  double loss = 0.0;
  GradientAccumulator grad;
};

/// Choice probability exp(r_c) / sum_j exp(r_j), max-subtracted.
double softmax_prob(std::span<const double> utilities, std::size_t chosen_index);

/// All choice probabilities at once (same normalization).
std::vector<double> softmax_probs(std::span<const double> utilities);

/// Item probabilities and the no-response remainder for the threshold model:
/// p(i) = exp(r_i) / (exp(theta) + sum_j exp(r_j)).
std::pair<std::vector<double>, double> softmax_ext_probs(std::span<const double> utilities,
                                                         double theta);

// Session losses. Sessions with several decisions contribute the sum of the
// single-choice losses, offer set held fixed.
double softmax_loss(const Session& session, const ParameterStore& store);
GradientAccumulator softmax_grad(const Session& session, const ParameterStore& store);

/// Exact slack: max(0, 1 - (r_star - mean of non-chosen utilities)).
double hinge_loss(const Session& session, const ParameterStore& store);

/// Training surrogate whose exact gradient is the smoothed-Heaviside update:
/// softplus(slope * shortfall) / slope. Finite-difference oracles check the
/// gradient against this, not against the kinked exact slack.
double hinge_loss_smoothed(const Session& session, const ParameterStore& store, double slope);
GradientAccumulator hinge_grad(const Session& session, const ParameterStore& store, double slope);

// Threshold extensions. The session may be a no-response record.
LossGrad softmax_ext_loss_grad(const Session& session, const ParameterStore& store);
LossGrad hinge_ext_loss_grad(const Session& session, const ParameterStore& store, double tradeoff_c,
                             double slope);
double hinge_ext_loss(const Session& session, const ParameterStore& store, double tradeoff_c);
double hinge_ext_loss_smoothed(const Session& session, const ParameterStore& store,
                               double tradeoff_c, double slope);

// CF baselines on single dyads.
LossGrad cf_l2_loss_grad(const DyadObservation& obs, const ParameterStore& store);
LossGrad cf_logistic_loss_grad(const DyadObservation& obs, const ParameterStore& store);

// Dispatch on LossKind; used by the trainer and objective reporting.
// record_loss reports the exact (unsmoothed) per-record loss.
double record_loss(const LossKind& kind, const Session& session, const ParameterStore& store);
double record_loss(const LossKind& kind, const DyadObservation& obs, const ParameterStore& store);
GradientAccumulator record_grad(const LossKind& kind, const Session& session,
                                const ParameterStore& store);
GradientAccumulator record_grad(const LossKind& kind, const DyadObservation& obs,
                                const ParameterStore& store);

}  // namespace ccf
