#include "ccf/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace ccf {

namespace {

double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (const double x : v) {
    sum += std::exp(x - m);
  }
  return m + std::log(sum);
}

// Everything a session loss touches, gathered once.
struct SessionView {
  std::vector<double> user_vec;
  std::vector<std::vector<double>> item_vecs;
  std::vector<double> utilities;
  std::vector<std::size_t> decision_indices;
};

SessionView gather(const Session& session, const ParameterStore& store) {
  SessionView view;
  view.user_vec = store.user_vector(session.user);
  view.item_vecs.reserve(session.offer_set.size());
  view.utilities.reserve(session.offer_set.size());
  for (const auto& item : session.offer_set) {
    auto vec = store.item_vector(item);
    double r = 0.0;
    for (int c = 0; c < store.dim(); ++c) {
      r += view.user_vec[c] * vec[c];
    }
    view.item_vecs.push_back(std::move(vec));
    view.utilities.push_back(r);
  }
  for (const auto& d : session.decision_set) {
    const auto it = std::find(session.offer_set.begin(), session.offer_set.end(), d);
    if (it == session.offer_set.end()) {
      throw DataError("decision '" + d + "' is not in the offer set");
    }
    view.decision_indices.push_back(
        static_cast<std::size_t>(it - session.offer_set.begin()));
  }
  return view;
}

void require_responded(const Session& session, const char* loss_name) {
  if (session.decision_set.empty()) {
    throw WrongLossError(std::string(loss_name) +
                         ": session has no decision; use the -ext loss for no-response data");
  }
}

void require_competition(const Session& session, const char* loss_name) {
  if (session.offer_set.size() < 2) {
    throw WrongLossError(std::string(loss_name) +
                         ": offer set of size 1 leaves no non-chosen item to compare against");
  }
}

// Scatter per-utility partials through the bilinear chain rule:
// d/dphi_i = dldr_i * phi_u,  d/dphi_u = sum_i dldr_i * phi_i.
void chain_to_factors(const Session& session, const SessionView& view,
                      std::span<const double> dldr, GradientAccumulator& acc) {
  const int k = static_cast<int>(view.user_vec.size());
  for (std::size_t j = 0; j < session.offer_set.size(); ++j) {
    for (int c = 0; c < k; ++c) {
      acc.add(ParamKind::ItemFactor, session.offer_set[j], c, dldr[j] * view.user_vec[c]);
    }
  }
  for (int c = 0; c < k; ++c) {
    double g = 0.0;
    for (std::size_t j = 0; j < session.offer_set.size(); ++j) {
      g += dldr[j] * view.item_vecs[j][c];
    }
    acc.add(ParamKind::UserFactor, session.user, c, g);
  }
}

// Mean utility of the offers other than the one at chosen.
double mean_of_others(std::span<const double> utilities, std::size_t chosen) {
  double sum = 0.0;
  for (std::size_t j = 0; j < utilities.size(); ++j) {
    if (j != chosen) {
      sum += utilities[j];
    }
  }
  return sum / static_cast<double>(utilities.size() - 1);
}

void require_label(const DyadObservation& obs, double a, double b, const char* loss_name) {
  if (obs.label != a && obs.label != b) {
    throw WrongLossError(std::string(loss_name) + ": label must be " + std::to_string(a) + " or " +
                         std::to_string(b));
  }
}

struct DyadView {
  std::vector<double> user_vec;
  std::vector<double> item_vec;
  double r = 0.0;
};

DyadView gather(const DyadObservation& obs, const ParameterStore& store) {
  DyadView view;
  view.user_vec = store.user_vector(obs.user);
  view.item_vec = store.item_vector(obs.item);
  for (int c = 0; c < store.dim(); ++c) {
    view.r += view.user_vec[c] * view.item_vec[c];
  }
  return view;
}

// loss = f(r); dldr falls through the two factor vectors.
LossGrad dyad_loss_grad(const DyadObservation& obs, const DyadView& view, double loss,
                        double dldr) {
  LossGrad out;
  out.loss = loss;
  const int k = static_cast<int>(view.user_vec.size());
  for (int c = 0; c < k; ++c) {
    out.grad.add(ParamKind::UserFactor, obs.user, c, dldr * view.item_vec[c]);
    out.grad.add(ParamKind::ItemFactor, obs.item, c, dldr * view.user_vec[c]);
  }
  return out;
}

}  // namespace

LossKind LossKind::parse(const std::string& name) {
  LossKind kind;
  if (name == "softmax") {
    kind.tag = Tag::Softmax;
  } else if (name == "hinge") {
    kind.tag = Tag::Hinge;
  } else if (name == "softmax-ext") {
    kind.tag = Tag::SoftmaxExt;
  } else if (name == "hinge-ext") {
    kind.tag = Tag::HingeExt;
  } else if (name == "l2") {
    kind.tag = Tag::CfL2;
  } else if (name == "logistic") {
    kind.tag = Tag::CfLogistic;
  } else {
    throw ConfigError("unknown loss '" + name + "'");
  }
  return kind;
}

std::string LossKind::name() const {
  switch (tag) {
    case Tag::Softmax: return "softmax";
    case Tag::Hinge: return "hinge";
    case Tag::SoftmaxExt: return "softmax-ext";
    case Tag::HingeExt: return "hinge-ext";
    case Tag::CfL2: return "l2";
    case Tag::CfLogistic: return "logistic";
  }
  return "?";
}

std::vector<double> softmax_probs(std::span<const double> utilities) {
  const double lse = log_sum_exp(utilities);
  std::vector<double> p(utilities.size());
  for (std::size_t j = 0; j < utilities.size(); ++j) {
    p[j] = std::exp(utilities[j] - lse);
  }
  return p;
}

double softmax_prob(std::span<const double> utilities, std::size_t chosen_index) {
  return std::exp(utilities[chosen_index] - log_sum_exp(utilities));
}

std::pair<std::vector<double>, double> softmax_ext_probs(std::span<const double> utilities,
                                                         double theta) {
  std::vector<double> all(utilities.begin(), utilities.end());
  all.push_back(theta);
  const double lse = log_sum_exp(all);
  std::vector<double> p(utilities.size());
  for (std::size_t j = 0; j < utilities.size(); ++j) {
    p[j] = std::exp(utilities[j] - lse);
  }
  return {std::move(p), std::exp(theta - lse)};
}

double softmax_loss(const Session& session, const ParameterStore& store) {
  require_responded(session, "softmax_loss");
  const SessionView view = gather(session, store);
  const double lse = log_sum_exp(view.utilities);
  double loss = 0.0;
  for (const std::size_t star : view.decision_indices) {
    loss += lse - view.utilities[star];
  }
  return loss;
}

GradientAccumulator softmax_grad(const Session& session, const ParameterStore& store) {
  require_responded(session, "softmax_grad");
  const SessionView view = gather(session, store);
  const std::vector<double> p = softmax_probs(view.utilities);
  const auto n_dec = static_cast<double>(view.decision_indices.size());
  std::vector<double> dldr(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    dldr[j] = n_dec * p[j];
  }
  for (const std::size_t star : view.decision_indices) {
    dldr[star] -= 1.0;
  }
  GradientAccumulator acc;
  chain_to_factors(session, view, dldr, acc);
  return acc;
}

double hinge_loss(const Session& session, const ParameterStore& store) {
  require_responded(session, "hinge_loss");
  require_competition(session, "hinge_loss");
  const SessionView view = gather(session, store);
  double loss = 0.0;
  for (const std::size_t star : view.decision_indices) {
    const double shortfall =
        1.0 - view.utilities[star] + mean_of_others(view.utilities, star);
    loss += std::max(0.0, shortfall);
  }
  return loss;
}

double hinge_loss_smoothed(const Session& session, const ParameterStore& store, double slope) {
  require_responded(session, "hinge_loss");
  require_competition(session, "hinge_loss");
  const SessionView view = gather(session, store);
  double loss = 0.0;
  for (const std::size_t star : view.decision_indices) {
    const double shortfall =
        1.0 - view.utilities[star] + mean_of_others(view.utilities, star);
    loss += softplus(slope * shortfall) / slope;
  }
  return loss;
}

GradientAccumulator hinge_grad(const Session& session, const ParameterStore& store, double slope) {
  require_responded(session, "hinge_grad");
  require_competition(session, "hinge_grad");
  const SessionView view = gather(session, store);
  const double inv_others = 1.0 / static_cast<double>(session.offer_set.size() - 1);
  std::vector<double> dldr(view.utilities.size(), 0.0);
  for (const std::size_t star : view.decision_indices) {
    const double shortfall =
        1.0 - view.utilities[star] + mean_of_others(view.utilities, star);
    const double h = sigmoid(slope * shortfall);
    for (std::size_t j = 0; j < dldr.size(); ++j) {
      dldr[j] += j == star ? -h : h * inv_others;
    }
  }
  GradientAccumulator acc;
  chain_to_factors(session, view, dldr, acc);
  return acc;
}

LossGrad softmax_ext_loss_grad(const Session& session, const ParameterStore& store) {
  if (!store.thresholds_enabled()) {
    throw ConfigError("softmax_ext: action thresholds are not enabled on this store");
  }
  const SessionView view = gather(session, store);
  const double theta = store.threshold(session.user);
  const auto [p, p_none] = softmax_ext_probs(view.utilities, theta);

  LossGrad out;
  std::vector<double> all(view.utilities.begin(), view.utilities.end());
  all.push_back(theta);
  const double lse = log_sum_exp(all);
  std::vector<double> dldr(p.size(), 0.0);
  double dldtheta = 0.0;
  if (session.responded()) {
    const auto n_dec = static_cast<double>(view.decision_indices.size());
    for (const std::size_t star : view.decision_indices) {
      out.loss += lse - view.utilities[star];
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      dldr[j] = n_dec * p[j];
    }
    for (const std::size_t star : view.decision_indices) {
      dldr[star] -= 1.0;
    }
    dldtheta = n_dec * p_none;
  } else {
    out.loss = lse - theta;  // = -log p(no response), safe when p_none underflows
    dldr = p;
    dldtheta = p_none - 1.0;
  }
  chain_to_factors(session, view, dldr, out.grad);
  out.grad.add(ParamKind::Threshold, session.user, 0, dldtheta);
  return out;
}

double hinge_ext_loss(const Session& session, const ParameterStore& store, double tradeoff_c) {
  if (!store.thresholds_enabled()) {
    throw ConfigError("hinge_ext: action thresholds are not enabled on this store");
  }
  const SessionView view = gather(session, store);
  const double theta = store.threshold(session.user);
  double loss = 0.0;
  if (session.responded()) {
    require_competition(session, "hinge_ext");
    for (const std::size_t star : view.decision_indices) {
      const double shortfall =
          1.0 - (view.utilities[star] - mean_of_others(view.utilities, star) - theta);
      loss += std::max(0.0, shortfall);
    }
  } else {
    for (const double r : view.utilities) {
      loss += tradeoff_c * std::max(0.0, 1.0 - (theta - r));
    }
  }
  return loss;
}

double hinge_ext_loss_smoothed(const Session& session, const ParameterStore& store,
                               double tradeoff_c, double slope) {
  if (!store.thresholds_enabled()) {
    throw ConfigError("hinge_ext: action thresholds are not enabled on this store");
  }
  const SessionView view = gather(session, store);
  const double theta = store.threshold(session.user);
  double loss = 0.0;
  if (session.responded()) {
    require_competition(session, "hinge_ext");
    for (const std::size_t star : view.decision_indices) {
      const double shortfall =
          1.0 - (view.utilities[star] - mean_of_others(view.utilities, star) - theta);
      loss += softplus(slope * shortfall) / slope;
    }
  } else {
    for (const double r : view.utilities) {
      loss += tradeoff_c * softplus(slope * (1.0 - theta + r)) / slope;
    }
  }
  return loss;
}

LossGrad hinge_ext_loss_grad(const Session& session, const ParameterStore& store,
                             double tradeoff_c, double slope) {
  if (!store.thresholds_enabled()) {
    throw ConfigError("hinge_ext: action thresholds are not enabled on this store");
  }
  if (tradeoff_c < 0) {
    throw ConfigError("hinge_ext: trade-off C must be >= 0");
  }
  const SessionView view = gather(session, store);
  const double theta = store.threshold(session.user);

  LossGrad out;
  out.loss = hinge_ext_loss(session, store, tradeoff_c);
  std::vector<double> dldr(view.utilities.size(), 0.0);
  double dldtheta = 0.0;
  if (session.responded()) {
    require_competition(session, "hinge_ext");
    const double inv_others = 1.0 / static_cast<double>(session.offer_set.size() - 1);
    for (const std::size_t star : view.decision_indices) {
      const double shortfall =
          1.0 - (view.utilities[star] - mean_of_others(view.utilities, star) - theta);
      const double h = sigmoid(slope * shortfall);
      for (std::size_t j = 0; j < dldr.size(); ++j) {
        dldr[j] += j == star ? -h : h * inv_others;
      }
      dldtheta += h;
    }
  } else {
    for (std::size_t j = 0; j < dldr.size(); ++j) {
      const double h = sigmoid(slope * (1.0 - theta + view.utilities[j]));
      dldr[j] = tradeoff_c * h;
      dldtheta -= tradeoff_c * h;
    }
  }
  chain_to_factors(session, view, dldr, out.grad);
  out.grad.add(ParamKind::Threshold, session.user, 0, dldtheta);
  return out;
}

LossGrad cf_l2_loss_grad(const DyadObservation& obs, const ParameterStore& store) {
  require_label(obs, 0.0, 1.0, "cf_l2");
  const DyadView view = gather(obs, store);
  const double err = view.r - obs.label;
  return dyad_loss_grad(obs, view, err * err, 2.0 * err);
}

LossGrad cf_logistic_loss_grad(const DyadObservation& obs, const ParameterStore& store) {
  require_label(obs, 1.0, -1.0, "cf_logistic");
  const DyadView view = gather(obs, store);
  const double margin = obs.label * view.r;
  return dyad_loss_grad(obs, view, softplus(-margin), -obs.label * sigmoid(-margin));
}

double record_loss(const LossKind& kind, const Session& session, const ParameterStore& store) {
  switch (kind.tag) {
    case LossKind::Tag::Softmax: return softmax_loss(session, store);
    case LossKind::Tag::Hinge: return hinge_loss(session, store);
    case LossKind::Tag::SoftmaxExt: return softmax_ext_loss_grad(session, store).loss;
    case LossKind::Tag::HingeExt: return hinge_ext_loss(session, store, kind.tradeoff_c);
    default:
      throw WrongLossError("loss '" + kind.name() + "' does not apply to session records");
  }
}

double record_loss(const LossKind& kind, const DyadObservation& obs, const ParameterStore& store) {
  switch (kind.tag) {
    case LossKind::Tag::CfL2: return cf_l2_loss_grad(obs, store).loss;
    case LossKind::Tag::CfLogistic: return cf_logistic_loss_grad(obs, store).loss;
    default:
      throw WrongLossError("loss '" + kind.name() + "' does not apply to dyadic records");
  }
}

GradientAccumulator record_grad(const LossKind& kind, const Session& session,
                                const ParameterStore& store) {
  switch (kind.tag) {
    case LossKind::Tag::Softmax: return softmax_grad(session, store);
    case LossKind::Tag::Hinge: return hinge_grad(session, store, kind.smooth_slope);
    case LossKind::Tag::SoftmaxExt: return softmax_ext_loss_grad(session, store).grad;
    case LossKind::Tag::HingeExt:
      return hinge_ext_loss_grad(session, store, kind.tradeoff_c, kind.smooth_slope).grad;
    default:
      throw WrongLossError("loss '" + kind.name() + "' does not apply to session records");
  }
}

GradientAccumulator record_grad(const LossKind& kind, const DyadObservation& obs,
                                const ParameterStore& store) {
  switch (kind.tag) {
    case LossKind::Tag::CfL2: return cf_l2_loss_grad(obs, store).grad;
    case LossKind::Tag::CfLogistic: return cf_logistic_loss_grad(obs, store).grad;
    default:
      throw WrongLossError("loss '" + kind.name() + "' does not apply to dyadic records");
  }
}

}  // namespace ccf
