#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "ccf/checkpoint.hpp"
#include "ccf/parameter_store.hpp"
#include "support/oracles.hpp"

using namespace ccf;
using namespace ccf::testing;

TEST_SUITE_BEGIN("model-core");

TEST_CASE("init with zero scale gives all-zero vectors") {
  const auto store = ParameterStore::init(make_ids("u", 1), make_ids("i", 1),
                                          InitConfig{2, 0.0, 7, false, std::nullopt});
  CHECK(store.user_vector("u0") == std::vector<double>{0.0, 0.0});
  CHECK(store.item_vector("i0") == std::vector<double>{0.0, 0.0});
}

TEST_CASE("init is bit-for-bit reproducible under a fixed seed") {
  const InitConfig config{6, 0.01, 42, true, std::nullopt};
  const auto a = ParameterStore::init(make_ids("u", 5), make_ids("i", 7), config);
  const auto b = ParameterStore::init(make_ids("u", 5), make_ids("i", 7), config);
  for (const auto& u : a.users()) {
    CHECK(a.user_vector(u) == b.user_vector(u));
    CHECK(a.threshold(u) == b.threshold(u));
  }
  for (const auto& i : a.items()) {
    CHECK(a.item_vector(i) == b.item_vector(i));
  }
}

TEST_CASE("init draws stay inside [-scale, scale] and thresholds start at zero") {
  const auto store = ParameterStore::init(make_ids("u", 20), make_ids("i", 20),
                                          InitConfig{10, 0.01, 1, true, std::nullopt});
  bool nonzero_seen = false;
  for (const auto& u : store.users()) {
    for (const double v : store.user_vector(u)) {
      CHECK(std::abs(v) <= 0.01);
      nonzero_seen |= v != 0.0;
    }
    CHECK(store.threshold(u) == 0.0);
  }
  for (const auto& i : store.items()) {
    for (const double v : store.item_vector(i)) {
      CHECK(std::abs(v) <= 0.01);
    }
  }
  CHECK(nonzero_seen);
}

TEST_CASE("init rejects empty universes and bad dims") {
  CHECK_THROWS_AS(ParameterStore::init({}, make_ids("i", 1), InitConfig{}), ConfigError);
  CHECK_THROWS_AS(ParameterStore::init(make_ids("u", 1), {}, InitConfig{}), ConfigError);
  CHECK_THROWS_AS(ParameterStore::init(make_ids("u", 1), make_ids("i", 1),
                                       InitConfig{0, 0.01, 1, false, std::nullopt}),
                  ConfigError);
}

TEST_CASE("utility is the factor inner product") {
  auto store = ParameterStore::init(make_ids("u", 1), make_ids("i", 2),
                                    InitConfig{2, 0.0, 0, false, std::nullopt});
  store.set_user_vector("u0", std::vector<double>{1.0, 0.0});
  store.set_item_vector("i0", std::vector<double>{1.0, 0.0});
  CHECK(store.utility("u0", "i0") == doctest::Approx(1.0));

  store.set_user_vector("u0", std::vector<double>{0.5, -0.5});
  store.set_item_vector("i1", std::vector<double>{2.0, 2.0});
  CHECK(store.utility("u0", "i1") == doctest::Approx(0.0));
}

TEST_CASE("utility matches an independent sum-of-products loop at k=8") {
  const auto store = random_store(4, 6, 8, 0.8, 99);
  for (const auto& u : store.users()) {
    for (const auto& i : store.items()) {
      const auto pu = store.user_vector(u);
      const auto pi = store.item_vector(i);
      double expect = 0.0;
      for (int c = 7; c >= 0; --c) {  // reversed order: different rounding path
        expect += pu[c] * pi[c];
      }
      CHECK(store.utility(u, i) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("unknown ids raise missing-entity when hashing is disabled") {
  const auto store = random_store(2, 2, 3, 0.1, 5);
  CHECK_THROWS_AS(store.utility("nobody", "i0"), MissingEntityError);
  CHECK_THROWS_AS(store.utility("u0", "nothing"), MissingEntityError);
}

TEST_CASE("utility is bilinear in the user factors") {
  const auto store = random_store(3, 3, 5, 0.7, 11);
  for (const double alpha : {0.0, -1.5, 3.25}) {
    ParameterStore scaled = store;
    for (const auto& u : store.users()) {
      auto v = store.user_vector(u);
      for (double& x : v) {
        x *= alpha;
      }
      scaled.set_user_vector(u, v);
    }
    for (const auto& u : store.users()) {
      for (const auto& i : store.items()) {
        CHECK(scaled.utility(u, i) ==
              doctest::Approx(alpha * store.utility(u, i)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("content utility: zero matrix degrades to the plain model") {
  auto store = random_store(2, 2, 4, 0.5, 3);
  store.set_content_matrix(2, 3, std::vector<double>(6, 0.0));
  ContentFeatures feats;
  for (const auto& u : store.users()) {
    feats.user_features[u] = {0.3, -1.0};
  }
  for (const auto& i : store.items()) {
    feats.item_features[i] = {1.0, 2.0, -0.5};
  }
  for (const auto& u : store.users()) {
    for (const auto& i : store.items()) {
      CHECK(store.utility_with_content(feats, u, i) == store.utility(u, i));
    }
  }
}

TEST_CASE("content utility: pure content term") {
  auto store = ParameterStore::init(make_ids("u", 1), make_ids("i", 1),
                                    InitConfig{2, 0.0, 0, false, std::nullopt});
  store.set_content_matrix(1, 1, std::vector<double>{3.0});
  ContentFeatures feats;
  feats.user_features["u0"] = {1.0};
  feats.item_features["i0"] = {1.0};
  CHECK(store.utility_with_content(feats, "u0", "i0") == doctest::Approx(3.0));
}

TEST_CASE("content utility matches the double-loop bilinear oracle") {
  auto store = random_store(2, 2, 4, 0.5, 21);
  Rng rng(77);
  std::vector<double> m(3 * 2);
  for (double& v : m) {
    v = rng.uniform(-1.0, 1.0);
  }
  store.set_content_matrix(3, 2, m);
  ContentFeatures feats;
  for (const auto& u : store.users()) {
    feats.user_features[u] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  for (const auto& i : store.items()) {
    feats.item_features[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  for (const auto& u : store.users()) {
    for (const auto& i : store.items()) {
      const auto& xu = feats.user_features[u];
      const auto& xi = feats.item_features[i];
      double expect = store.utility(u, i);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 2; ++b) {
          expect += xu[a] * m[a * 2 + b] * xi[b];
        }
      }
      CHECK(store.utility_with_content(feats, u, i) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("content utility rejects mismatched feature shapes") {
  auto store = random_store(1, 1, 2, 0.1, 1);
  store.set_content_matrix(2, 2, std::vector<double>(4, 1.0));
  ContentFeatures feats;
  feats.user_features["u0"] = {1.0};  // should be length 2
  feats.item_features["i0"] = {1.0, 2.0};
  CHECK_THROWS_AS(store.utility_with_content(feats, "u0", "i0"), ShapeError);
}

TEST_CASE("hash_index is deterministic and masked to range") {
  CHECK(hash_index(ParamKind::UserFactor, "abc", 3, 20) ==
        hash_index(ParamKind::UserFactor, "abc", 3, 20));
  CHECK(hash_index(ParamKind::UserFactor, "abc", 3, 20) !=
        hash_index(ParamKind::ItemFactor, "abc", 3, 20));
  Rng rng(123);
  for (const int bits : {1, 8, 20, 40}) {
    for (int trial = 0; trial < 200; ++trial) {
      const EntityId id = "e" + std::to_string(rng.next_u64() % 1000000);
      const auto idx = hash_index(ParamKind::ItemFactor, id, static_cast<int>(rng.index(64)), bits);
      CHECK(idx < (std::uint64_t{1} << bits));
    }
  }
}

TEST_CASE("hash collisions follow the birthday-bound pair count at bits=20") {
  // Expected colliding pairs for n keys on 2^bits slots: n(n-1)/2^(bits+1).
  const int bits = 20;
  const std::size_t n = 100000;
  std::map<std::uint64_t, std::size_t> occupancy;
  Rng rng(2024);
  for (std::size_t j = 0; j < n; ++j) {
    const EntityId id = "k" + std::to_string(j);
    const auto kind = rng.index(2) == 0 ? ParamKind::UserFactor : ParamKind::ItemFactor;
    ++occupancy[hash_index(kind, id, static_cast<int>(rng.index(16)), bits)];
  }
  double colliding_pairs = 0;
  for (const auto& [slot, count] : occupancy) {
    (void)slot;
    colliding_pairs += 0.5 * static_cast<double>(count) * static_cast<double>(count - 1);
  }
  const double expected =
      static_cast<double>(n) * static_cast<double>(n - 1) / std::pow(2.0, bits + 1);
  CHECK(colliding_pairs > expected / 3.0);
  CHECK(colliding_pairs < expected * 3.0);
}

TEST_CASE("collision-free hashed store reproduces plain utilities exactly") {
  const auto users = make_ids("user", 4);
  const auto items = make_ids("item", 6);
  const int dim = 3;
  const int bits = 22;
  // Confirm this tiny id set really is collision-free first.
  std::set<std::uint64_t> slots;
  for (const auto& u : users) {
    for (int c = 0; c < dim; ++c) {
      CHECK(slots.insert(hash_index(ParamKind::UserFactor, u, c, bits)).second);
    }
  }
  for (const auto& i : items) {
    for (int c = 0; c < dim; ++c) {
      CHECK(slots.insert(hash_index(ParamKind::ItemFactor, i, c, bits)).second);
    }
  }
  const auto plain =
      ParameterStore::init(users, items, InitConfig{dim, 0.05, 9, false, std::nullopt});
  const auto hashed = ParameterStore::init(users, items, InitConfig{dim, 0.05, 9, false, bits});
  for (const auto& u : users) {
    for (const auto& i : items) {
      CHECK(plain.utility(u, i) == hashed.utility(u, i));
    }
  }
}

TEST_CASE("hashed stores resolve unknown ids instead of throwing") {
  const auto store = ParameterStore::init(make_ids("u", 2), make_ids("i", 2),
                                          InitConfig{4, 0.1, 17, false, 16});
  CHECK_NOTHROW(store.utility("stranger", "i0"));
  CHECK_NOTHROW(store.utility("u0", "mystery-item"));
}

TEST_CASE("checkpoint round-trips exactly, including awkward reals") {
  auto store = random_store(3, 4, 3, 0.01, 31, true);
  store.set_user_vector("u0", std::vector<double>{1.0 / 3.0, -1e-300, 0.1});
  store.set_threshold("u1", -2.5e-17);
  store.set_content_matrix(2, 2, std::vector<double>{0.1, 2.0 / 3.0, -1e17, 4.0});

  std::stringstream first;
  Checkpoint::save(first, store);
  const ParameterStore loaded = Checkpoint::load(first);

  CHECK(loaded.dim() == store.dim());
  CHECK(loaded.thresholds_enabled());
  for (const auto& u : store.users()) {
    CHECK(loaded.user_vector(u) == store.user_vector(u));
    CHECK(loaded.threshold(u) == store.threshold(u));
  }
  for (const auto& i : store.items()) {
    CHECK(loaded.item_vector(i) == store.item_vector(i));
  }
  CHECK(loaded.content_at(1, 0) == store.content_at(1, 0));

  std::stringstream second;
  Checkpoint::save(second, loaded);
  CHECK(first.str() == second.str());
}

TEST_CASE("hashed checkpoint round-trips byte-identically") {
  const auto store = ParameterStore::init(make_ids("u", 5), make_ids("i", 5),
                                          InitConfig{4, 0.02, 8, false, 12});
  std::stringstream first;
  Checkpoint::save(first, store);
  const ParameterStore loaded = Checkpoint::load(first);
  CHECK(loaded.hashing_enabled());
  CHECK(loaded.hash_bits() == 12);
  std::stringstream second;
  Checkpoint::save(second, loaded);
  CHECK(first.str() == second.str());
}

TEST_CASE("checkpoint rejects malformed input") {
  {
    std::stringstream in("not-a-model v1 dim=3 hash_bits=none\n");
    CHECK_THROWS_AS(Checkpoint::load(in), DataError);
  }
  {
    std::stringstream in("ccf-model v1 dim=3 hash_bits=none\nU u0 1.0 2.0\n");  // missing value
    CHECK_THROWS_AS(Checkpoint::load(in), ShapeError);
  }
  {
    std::stringstream in("ccf-model v1 dim=1 hash_bits=none\nU u0 banana\n");
    CHECK_THROWS_AS(Checkpoint::load(in), DataError);
  }
  {
    std::stringstream in("");
    CHECK_THROWS_AS(Checkpoint::load(in), DataError);
  }
}

TEST_SUITE_END();
