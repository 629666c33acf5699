#include "ccf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ccf/objectives.hpp"
#include "ccf/rng.hpp"

namespace ccf {

void Session::validate(const std::string& where) const {
  const std::string at = where.empty() ? "" : where + ": ";
  if (offer_set.empty()) {
    throw DataError(at + "offer set must be non-empty");
  }
  std::set<EntityId> offers(offer_set.begin(), offer_set.end());
  if (offers.size() != offer_set.size()) {
    throw DataError(at + "duplicate item in offer set");
  }
  std::set<EntityId> decisions;
  for (const auto& d : decision_set) {
    if (!offers.count(d)) {
      throw DataError(at + "decision '" + d + "' is not in the offer set");
    }
    if (!decisions.insert(d).second) {
      throw DataError(at + "duplicate item in decision set");
    }
  }
}

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(text);
  while (std::getline(in, field, sep)) {
    out.push_back(field);
  }
  if (!text.empty() && text.back() == sep) {
    out.emplace_back();
  }
  return out;
}

void check_token(const std::string& token, const std::string& where) {
  if (token.empty()) {
    throw DataError(where + ": empty id");
  }
  if (token.find_first_of(" \t\r") != std::string::npos) {
    throw DataError(where + ": id '" + token + "' contains whitespace");
  }
}

// Calls fn(line_number, line) for each non-empty, non-comment line.
template <class Fn>
void for_each_record_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    fn(line_no, line);
  }
}

std::string line_tag(const std::filesystem::path& path, std::size_t line_no) {
  return path.filename().string() + ":" + std::to_string(line_no);
}

}  // namespace

DyadicDataset parse_dyadic(const std::filesystem::path& path) {
  DyadicDataset dataset;
  std::set<std::pair<EntityId, EntityId>> seen;
  for_each_record_line(path, [&](std::size_t line_no, const std::string& line) {
    const std::string where = line_tag(path, line_no);
    const auto fields = split_on(line, '\t');
    if (fields.size() != 2) {
      throw DataError(where + ": expected 'user<TAB>item', got " +
                      std::to_string(fields.size()) + " field(s)");
    }
    check_token(fields[0], where);
    check_token(fields[1], where);
    if (!seen.insert({fields[0], fields[1]}).second) {
      throw DataError(where + ": duplicate dyad (" + fields[0] + ", " + fields[1] + ")");
    }
    dataset.records.push_back(DyadObservation{fields[0], fields[1], 1.0});
    dataset.users.insert(fields[0]);
    dataset.items.insert(fields[1]);
  });
  return dataset;
}

SessionDataset parse_sessions(const std::filesystem::path& path) {
  SessionDataset dataset;
  for_each_record_line(path, [&](std::size_t line_no, const std::string& line) {
    const std::string where = line_tag(path, line_no);
    const auto fields = split_on(line, '\t');
    if (fields.size() != 3) {
      throw DataError(where + ": expected 'user<TAB>offers<TAB>decisions', got " +
                      std::to_string(fields.size()) + " field(s)");
    }
    check_token(fields[0], where);
    Session session;
    session.user = fields[0];
    for (const auto& token : split_on(fields[1], ',')) {
      check_token(token, where);
      session.offer_set.push_back(token);
    }
    if (fields[2].empty()) {
      throw DataError(where + ": empty decision field; spell an empty decision set as '-'");
    }
    if (fields[2] != "-") {
      for (const auto& token : split_on(fields[2], ',')) {
        check_token(token, where);
        session.decision_set.push_back(token);
      }
    }
    session.validate(where);
    dataset.users.insert(session.user);
    for (const auto& item : session.offer_set) {
      dataset.items.insert(item);
    }
    dataset.records.push_back(std::move(session));
  });
  return dataset;
}

void write_dyadic(const std::filesystem::path& path, const DyadicDataset& dataset) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path.string() + "'");
  }
  for (const auto& dyad : dataset.records) {
    out << dyad.user << '\t' << dyad.item << '\n';
  }
}

void write_sessions(const std::filesystem::path& path, const SessionDataset& dataset) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path.string() + "'");
  }
  for (const auto& session : dataset.records) {
    out << session.user << '\t';
    for (std::size_t j = 0; j < session.offer_set.size(); ++j) {
      out << (j ? "," : "") << session.offer_set[j];
    }
    out << '\t';
    if (session.decision_set.empty()) {
      out << '-';
    } else {
      for (std::size_t j = 0; j < session.decision_set.size(); ++j) {
        out << (j ? "," : "") << session.decision_set[j];
      }
    }
    out << '\n';
  }
}

SessionDataset simulate_contexts(const DyadicDataset& dyads, int m, std::uint64_t seed) {
  if (m < 0) {
    throw ConfigError("simulate_contexts: m must be >= 0");
  }
  std::map<EntityId, std::unordered_set<std::string>> positives;
  for (const auto& dyad : dyads.records) {
    positives[dyad.user].insert(dyad.item);
  }
  const std::vector<EntityId> item_pool(dyads.items.begin(), dyads.items.end());
  for (const auto& [user, pos] : positives) {
    if (item_pool.size() - pos.size() < static_cast<std::size_t>(m)) {
      throw DataError("simulate_contexts: user '" + user + "' has only " +
                      std::to_string(item_pool.size() - pos.size()) +
                      " unobserved items, need " + std::to_string(m));
    }
  }

  Rng rng(Rng::mix(seed, 0x51EDC0));
  SessionDataset out;
  out.users = dyads.users;
  out.items = dyads.items;
  for (const auto& dyad : dyads.records) {
    const auto& pos = positives.at(dyad.user);
    Session session;
    session.user = dyad.user;
    session.offer_set.push_back(dyad.item);
    std::unordered_set<std::string> drawn;
    while (static_cast<int>(drawn.size()) < m) {
      const auto& candidate = item_pool[rng.index(item_pool.size())];
      if (pos.count(candidate) || drawn.count(candidate)) {
        continue;
      }
      drawn.insert(candidate);
      session.offer_set.push_back(candidate);
    }
    rng.shuffle(session.offer_set);
    session.decision_set.push_back(dyad.item);
    out.records.push_back(std::move(session));
  }
  return out;
}

template <class Record>
std::array<Dataset<Record>, 3> split(const Dataset<Record>& dataset,
                                     const std::array<double, 3>& ratios, std::uint64_t seed) {
  double sum = 0.0;
  for (const double r : ratios) {
    if (r < 0) {
      throw ConfigError("split: ratios must be >= 0");
    }
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1");
  }

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::mix(seed, 0x5017));
  rng.shuffle(order);

  // Largest-remainder apportionment: exact on divisible counts.
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> fractional{};
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    const double exact = static_cast<double>(n) * ratios[p];
    counts[p] = static_cast<std::size_t>(std::floor(exact));
    fractional[p] = exact - std::floor(exact);
    assigned += counts[p];
  }
  std::array<int, 3> by_remainder{0, 1, 2};
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](int a, int b) { return fractional[a] > fractional[b]; });
  for (std::size_t left = n - assigned, j = 0; left > 0; --left, ++j) {
    ++counts[by_remainder[j % 3]];
  }

  std::array<Dataset<Record>, 3> pieces;
  std::size_t cursor = 0;
  for (int p = 0; p < 3; ++p) {
    pieces[p].users = dataset.users;
    pieces[p].items = dataset.items;
    for (std::size_t j = 0; j < counts[p]; ++j) {
      pieces[p].records.push_back(dataset.records[order[cursor++]]);
    }
  }
  return pieces;
}

template std::array<SessionDataset, 3> split<Session>(const SessionDataset&,
                                                      const std::array<double, 3>&, std::uint64_t);
template std::array<DyadicDataset, 3> split<DyadObservation>(const DyadicDataset&,
                                                             const std::array<double, 3>&,
                                                             std::uint64_t);

DyadicDataset extract_positive_dyads(const SessionDataset& sessions) {
  DyadicDataset out;
  out.users = sessions.users;
  out.items = sessions.items;
  std::set<std::pair<EntityId, EntityId>> seen;
  for (const auto& session : sessions.records) {
    for (const auto& item : session.decision_set) {
      if (seen.insert({session.user, item}).second) {
        out.records.push_back(DyadObservation{session.user, item, 1.0});
      }
    }
  }
  return out;
}

DyadicDataset extract_dyads_with_context_negatives(const SessionDataset& sessions,
                                                   double negative_label) {
  std::set<std::pair<EntityId, EntityId>> positive;
  for (const auto& session : sessions.records) {
    for (const auto& item : session.decision_set) {
      positive.insert({session.user, item});
    }
  }
  DyadicDataset out;
  out.users = sessions.users;
  out.items = sessions.items;
  std::set<std::pair<EntityId, EntityId>> seen;
  for (const auto& session : sessions.records) {
    for (const auto& item : session.offer_set) {
      const auto key = std::make_pair(session.user, item);
      if (!seen.insert(key).second) {
        continue;
      }
      const bool is_positive = positive.count(key) > 0;
      out.records.push_back(
          DyadObservation{session.user, item, is_positive ? 1.0 : negative_label});
    }
  }
  return out;
}

double SynthConfig::sigma() const {
  if (factor_sigma) {
    return *factor_sigma;
  }
  return std::sqrt(2.0) * std::pow(static_cast<double>(dim), -0.25);
}

void SynthConfig::validate() const {
  if (dim < 1 || n_users < 1 || n_items < 1 || sessions_per_user < 1) {
    throw ConfigError("synth: dim, n_users, n_items, sessions_per_user must be >= 1");
  }
  if (offer_size < 1 || offer_size > n_items) {
    throw ConfigError("synth: offer_size must be in [1, n_items]");
  }
  if (factor_sigma && *factor_sigma < 0) {
    throw ConfigError("synth: factor_sigma must be >= 0");
  }
}

std::pair<SyntheticGroundTruth, SessionDataset> synth_generate(const SynthConfig& config) {
  config.validate();
  std::set<EntityId> users;
  std::set<EntityId> items;
  std::vector<EntityId> user_list;
  std::vector<EntityId> item_list;
  for (int u = 0; u < config.n_users; ++u) {
    user_list.push_back("u" + std::to_string(u));
    users.insert(user_list.back());
  }
  for (int i = 0; i < config.n_items; ++i) {
    item_list.push_back("i" + std::to_string(i));
    items.insert(item_list.back());
  }

  SyntheticGroundTruth truth;
  truth.config = config;
  truth.store = ParameterStore::init(
      users, items, InitConfig{config.dim, 0.0, config.seed, config.thresholds, std::nullopt});

  Rng rng(Rng::mix(config.seed, 0x7A07));
  const double sigma = config.sigma();
  std::vector<double> vec(config.dim);
  for (const auto& u : user_list) {
    for (double& v : vec) {
      v = rng.normal(0.0, sigma);
    }
    truth.store.set_user_vector(u, vec);
  }
  for (const auto& i : item_list) {
    for (double& v : vec) {
      v = rng.normal(0.0, sigma);
    }
    truth.store.set_item_vector(i, vec);
  }
  if (config.thresholds) {
    for (const auto& u : user_list) {
      truth.store.set_threshold(u, rng.normal(0.0, 1.0));
    }
  }

  SessionDataset dataset;
  dataset.users = users;
  dataset.items = items;
  std::vector<double> utilities(config.offer_size);
  for (const auto& u : user_list) {
    for (int s = 0; s < config.sessions_per_user; ++s) {
      Session session;
      session.user = u;
      std::unordered_set<std::string> drawn;
      while (static_cast<int>(session.offer_set.size()) < config.offer_size) {
        const auto& candidate = item_list[rng.index(item_list.size())];
        if (drawn.count(candidate)) {
          continue;
        }
        drawn.insert(candidate);
        session.offer_set.push_back(candidate);
      }
      for (int j = 0; j < config.offer_size; ++j) {
        utilities[j] = truth.store.utility(u, session.offer_set[j]);
      }
      if (config.thresholds) {
        const auto [probs, p_none] =
            softmax_ext_probs(utilities, truth.store.threshold(u));
        double ticket = rng.uniform01();
        std::size_t pick = probs.size();  // falls through to no-response
        for (std::size_t j = 0; j < probs.size(); ++j) {
          if (ticket < probs[j]) {
            pick = j;
            break;
          }
          ticket -= probs[j];
        }
        if (pick < probs.size()) {
          session.decision_set.push_back(session.offer_set[pick]);
        }
      } else {
        const std::vector<double> probs = softmax_probs(utilities);
        double ticket = rng.uniform01();
        std::size_t pick = probs.size() - 1;  // residual mass lands on the last offer
        for (std::size_t j = 0; j < probs.size(); ++j) {
          if (ticket < probs[j]) {
            pick = j;
            break;
          }
          ticket -= probs[j];
        }
        session.decision_set.push_back(session.offer_set[pick]);
      }
      dataset.records.push_back(std::move(session));
    }
  }
  return {std::move(truth), std::move(dataset)};
}

}  // namespace ccf
