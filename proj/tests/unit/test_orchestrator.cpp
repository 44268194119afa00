#include "doctest.h"
#include "feddiv/orchestrator.hpp"
#include "feddiv/run_log.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <set>
#include <sstream>

using namespace feddiv;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.num_samples = 600;
  c.num_clients = 6;
  c.client_fraction = 0.5;
  c.total_rounds = 4;
  c.warmup_iterations = 1;
  c.local_epochs = 2;
  c.model_hidden_sizes = {8};
  return c;
}

}  // namespace

TEST_CASE("client selection sizes") {
  RngStream rng(1);
  auto all = select_clients(7, 1.0, rng);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  auto ten = select_clients(100, 0.1, rng);
  CHECK(ten.size() == 10);
  CHECK(std::set<std::size_t>(ten.begin(), ten.end()).size() == 10);
  CHECK(std::is_sorted(ten.begin(), ten.end()));
  CHECK(select_clients(10, 0.01, rng).size() == 1);
  auto some = select_clients(10, 0.5, rng, {2, 4, 6});
  CHECK(some == std::vector<std::size_t>{2, 4, 6});
}

TEST_CASE("client selection is deterministic") {
  RngStream a = RngStream(3).fork(Purpose::kSelection, 5);
  RngStream b = RngStream(3).fork(Purpose::kSelection, 5);
  CHECK(select_clients(50, 0.2, a) == select_clients(50, 0.2, b));
}

TEST_CASE("fedavg identities") {
  RngStream rng(2);
  auto a = oracle::random_params(rng, 2, {3}, 2);
  auto b = oracle::random_params(rng, 2, {3}, 2);
  CHECK(fedavg_aggregate({a}, {7}).flatten() == a.flatten());
  CHECK(oracle::max_abs_diff(fedavg_aggregate({a, a}, {2, 5}), a) <= 1e-15);
  auto mix = fedavg_aggregate({a, b}, {1, 3});
  Vector want = 0.25 * a.flatten() + 0.75 * b.flatten();
  CHECK((mix.flatten() - want).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS(fedavg_aggregate({a, b}, {0, 0}));
  CHECK_THROWS(fedavg_aggregate({a, oracle::random_params(rng, 2, {4}, 2)}, {1, 1}));
}

TEST_CASE("fedavg matches the oracle and stays in the envelope") {
  RngStream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.index(8);
    std::vector<ModelParams> models;
    std::vector<std::size_t> weights;
    for (std::size_t i = 0; i < m; ++i) {
      models.push_back(oracle::random_params(rng, 3, {4}, 3));
      weights.push_back(1 + rng.index(300));
    }
    auto got = fedavg_aggregate(models, weights);
    CHECK(oracle::max_abs_diff(got, oracle::weighted_average(models, weights)) <= 1e-12);
    const Vector g = got.flatten();
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      double lo = 1e300, hi = -1e300;
      for (const auto& mm : models) {
        const double v = mm.flatten()[i];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      CHECK(g[i] >= lo - 1e-12);
      CHECK(g[i] <= hi + 1e-12);
    }
  }
}

TEST_CASE("warm-up round count") {
  RunConfig c;
  c.warmup_iterations = 5;
  c.client_fraction = 0.1;
  c.num_clients = 100;
  CHECK(c.warmup_rounds() == 50);
  c.warmup_iterations = 0;
  CHECK(c.warmup_rounds() == 0);
  c = RunConfig{};
  CHECK(c.warmup_rounds() == 8);
}

TEST_CASE("zero warm-up leaves the server untouched") {
  RunConfig c = small_config();
  c.warmup_iterations = 0;
  auto fed = prepare_federation(c);
  auto clients = make_clients(fed);
  auto server = make_server(c, clients);
  const Vector before = server.model.flatten();
  const RngStream root(c.seed);
  RoundContext ctx{c, root, fed.test};
  CHECK(warmup(server, clients, ctx).empty());
  CHECK(server.model.flatten() == before);
  CHECK(server.round == 0);
}

TEST_CASE("warm-up learns separable blobs") {
  RunConfig c = small_config();
  c.num_samples = 1500;
  c.noise_client_prob = 0.0;
  auto fed = prepare_federation(c);
  auto clients = make_clients(fed);
  auto server = make_server(c, clients);
  const RngStream root(c.seed);
  RoundContext ctx{c, root, fed.test};
  auto records = warmup(server, clients, ctx);
  REQUIRE(records.size() == 2);
  CHECK(records.back().test_accuracy > 1.0 / c.num_classes + 0.2);
}

TEST_CASE("single client round equals local training") {
  RunConfig c = small_config();
  c.num_clients = 1;
  c.client_fraction = 1.0;
  c.warmup_iterations = 0;
  c.total_rounds = 1;
  c.algorithm_variant = Variant::kFedAvgBaseline;
  auto fed = prepare_federation(c);
  auto result = run_experiment(c, fed);
  const RngStream root(c.seed);
  auto clients = make_clients(fed);
  auto server = make_server(c, clients);
  RngStream rng = root.fork(Purpose::kLocalTrain, 1, 0);
  auto local = local_train(server.model, training_pairs(clients[0].data), train_options(c), rng);
  CHECK(result.final_server.model.flatten() == local.flatten());
}

TEST_CASE("round records are structurally consistent") {
  RunConfig c = small_config();
  auto result = run_experiment(c);
  CHECK(result.rounds.size() == 1 + static_cast<std::size_t>(c.warmup_rounds() + c.total_rounds));
  CHECK(result.rounds.front().phase == "initial");
  for (const auto& rec : result.rounds) {
    CHECK(rec.test_accuracy >= 0.0);
    CHECK(rec.test_accuracy <= 1.0);
    CHECK(rec.training_stability >= 0.0);
    if (rec.phase != "train") continue;
    CHECK(rec.clients.size() == static_cast<std::size_t>(c.clients_per_round()));
    for (const auto& s : rec.clients) {
      CHECK(s.clean + s.noisy == s.num_samples);
      CHECK(s.relabeled <= s.noisy);
      CHECK(s.relabeled_correct <= s.relabeled);
      REQUIRE(s.filtering_accuracy);
      CHECK(*s.filtering_accuracy >= 0.0);
      CHECK(*s.filtering_accuracy <= 1.0);
      REQUIRE(s.local_filter);
      s.local_filter->validate();
    }
    REQUIRE(rec.global_filter);
    CHECK(std::abs(rec.global_filter->weight[0] + rec.global_filter->weight[1] - 1.0) <= 1e-12);
  }
}

TEST_CASE("empty schedule logs only the initial evaluation") {
  RunConfig c = small_config();
  c.total_rounds = 0;
  c.warmup_iterations = 0;
  auto result = run_experiment(c);
  REQUIRE(result.rounds.size() == 1);
  CHECK(result.rounds[0].phase == "initial");
}

TEST_CASE("runs are deterministic, with and without threads") {
  RunConfig c = small_config();
  auto fed = prepare_federation(c);
  std::ostringstream a, b, t;
  run_logged(c, fed, a);
  run_logged(c, fed, b);
  RunConfig threaded = c;
  threaded.num_threads = 3;
  run_logged(threaded, fed, t);
  CHECK(a.str() == b.str());
  // num_threads is echoed in the config line; compare everything after it.
  auto body = [](const std::string& s) { return s.substr(s.find('\n')); };
  CHECK(body(a.str()) == body(t.str()));
}

TEST_CASE("clean data with an all-clean filter reduces to fedavg") {
  RunConfig c = small_config();
  c.noise_client_prob = 0.0;
  c.clean_posterior_threshold = 0.0;
  auto fed = prepare_federation(c);
  RunConfig base = c;
  base.algorithm_variant = Variant::kFedAvgBaseline;
  auto a = run_experiment(c, fed);
  auto b = run_experiment(base, fed);
  for (const auto& rec : a.rounds)
    for (const auto& s : rec.clients) CHECK(s.estimated_noise_level == 0.0);
  CHECK(oracle::max_abs_diff(a.final_server.model, b.final_server.model) <= 1e-9);
  CHECK(a.summary.best_test_accuracy == b.summary.best_test_accuracy);
}

TEST_CASE("variants differ only in filter aggregation") {
  RunConfig c = small_config();
  auto fed = prepare_federation(c);
  for (Variant v : {Variant::kFedDiv, Variant::kFedDivDegraded, Variant::kFedDivLocalFilter}) {
    RunConfig cfg = c;
    cfg.algorithm_variant = v;
    auto r = run_experiment(cfg, fed);
    CHECK(r.summary.mean_filtering_accuracy.has_value());
    const bool has_global = r.rounds.back().global_filter.has_value();
    CHECK(has_global == (v != Variant::kFedDivLocalFilter));
  }
  RunConfig base = c;
  base.algorithm_variant = Variant::kFedAvgBaseline;
  CHECK(!run_experiment(base, fed).summary.mean_filtering_accuracy.has_value());
}

TEST_CASE("federation matches the configured noise") {
  RunConfig c = small_config();
  c.noise_client_prob = 1.0;
  auto fed = prepare_federation(c);
  CHECK(fed.train.size() + fed.test.size() == c.num_samples);
  for (std::size_t k = 0; k < fed.client_data.size(); ++k) {
    CHECK(fed.noise.client_noise_levels[k] >= c.noise_lower_bound);
    CHECK(realized_noise_rate(fed.client_data[k]) <= fed.noise.client_noise_levels[k] + 1e-12);
  }
}
