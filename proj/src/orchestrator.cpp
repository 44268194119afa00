#include "feddiv/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace feddiv {

namespace {

// Runs fn(0..n-1), spread over `threads` workers. Results are written by
// index, so the outcome never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::vector<std::size_t> eligible_clients(const std::vector<ClientState>& clients) {
  std::vector<std::size_t> ids;
  for (const auto& c : clients)
    if (c.num_samples() > 0) ids.push_back(c.id);
  return ids;
}

std::vector<double> rescale_unit(std::vector<double> losses) {
  const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
  const double a = *lo;
  const double range = *hi - *lo;
  if (range > 0.0)
    for (auto& x : losses) x = (x - a) / range;
  return losses;
}

std::vector<double> filter_losses(const ModelParams& model, const LabeledDataset& data,
                                  const RunConfig& config) {
  auto losses = per_sample_losses(model, data);
  return config.normalize_losses ? rescale_unit(std::move(losses)) : losses;
}

ClientRoundStats base_stats(const ClientState& client) {
  ClientRoundStats s;
  s.client = client.id;
  s.num_samples = client.num_samples();
  s.true_noise_level = client.true_noise_level;
  s.realized_noise_rate = realized_noise_rate(client.data);
  return s;
}

bool wants_confusion(const RunConfig& config, int round) {
  return std::find(config.confusion_rounds.begin(), config.confusion_rounds.end(), round) !=
         config.confusion_rounds.end();
}

struct ClientUpdate {
  ModelParams model;
  ClientBias bias;
  GmmParams local_filter;
  ClientRoundStats stats;
};

// Steps 2-4 for one client: split with the received filter, relabel, T
// epochs of re-selection plus training, bias update, local EM.
ClientUpdate feddiv_client_update(const ServerState& server, const ClientState& client,
                                  const RoundContext& ctx, int step) {
  const RunConfig& cfg = ctx.config;
  const LabeledDataset& data = client.data;
  const bool local_only = cfg.algorithm_variant == Variant::kFedDivLocalFilter;
  const GmmParams& received_filter =
      local_only ? server.bank.entries.at(client.id).filter : server.global_filter;

  ClientUpdate out;
  out.stats = base_stats(client);

  const auto losses = filter_losses(server.model, data, cfg);
  const FilterSplit split = filter_split(losses, received_filter, cfg.clean_posterior_threshold);
  const double noise_estimate = split.noise_level;
  out.stats.estimated_noise_level = noise_estimate;
  out.stats.clean = split.clean.size();
  out.stats.noisy = split.noisy.size();
  out.stats.filtering_accuracy = filtering_accuracy(clean_flags(split, data.size()), data.clean_mask);

  std::vector<Relabeled> relabeled;
  if (noise_estimate > cfg.noisy_client_threshold)
    relabeled = relabel(data, split.noisy, server.model, cfg.relabel_threshold);
  out.stats.relabeled = relabeled.size();
  for (const auto& r : relabeled) out.stats.relabeled_correct += r.label == data.true_labels[r.index];

  const bool use_reselection = noise_estimate >= cfg.noisy_client_threshold;
  std::vector<Candidate> candidates;
  std::vector<int> global_labels;
  if (use_reselection) {
    for (std::size_t i : split.clean) candidates.push_back({i, data.given_labels[i]});
    for (const auto& r : relabeled) candidates.push_back({r.index, r.label});
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
    global_labels.reserve(data.size());
    for (const auto& x : data.features) global_labels.push_back(argmax(predict_proba(server.model, x)));
  }

  RngStream rng = ctx.root.fork(Purpose::kLocalTrain, step, client.id);
  LocalTrainer trainer(server.model, train_options(cfg));
  int trained_epochs = 0;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::vector<Candidate> reselected;
    if (use_reselection) {
      reselected = reselect(data, candidates, global_labels, trainer.params(), client.bias, cfg.debias_factor);
      out.stats.reselected = reselected.size();
    }
    const auto training = choose_training_set(noise_estimate, reselected, data, cfg.noisy_client_threshold);
    if (training.empty()) {
      ++out.stats.starved_epochs;
      continue;
    }
    std::vector<TrainingPair> pairs;
    pairs.reserve(training.size());
    for (const auto& c : training) pairs.push_back({data.features[c.index], c.label});
    trainer.train_epoch(pairs, rng);
    ++trained_epochs;
  }
  out.stats.starved_round = cfg.local_epochs > 0 && trained_epochs == 0;
  out.model = trainer.params();

  out.bias = update_bias(client.bias, out.model, data, cfg.bias_momentum);

  const auto trained_losses = filter_losses(out.model, data, cfg);
  const GmmFit fit = fit_local_gmm(trained_losses, received_filter, cfg.em_max_iters, cfg.em_tolerance);
  out.local_filter = fit.params;
  out.stats.local_filter = fit.params;
  if (wants_confusion(cfg, step)) out.stats.confusion = confusion_matrix(out.model, data);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double realized_noise_rate(const LabeledDataset& data) {
  if (data.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) wrong += data.given_labels[i] != data.true_labels[i];
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

Federation prepare_federation(const RunConfig& config) {
  config.validate();
  const RngStream root(config.seed);
  Federation fed;

  RngStream data_rng = root.fork(Purpose::kDataset);
  auto blobs = make_blobs_with_centers(config.num_samples, config.num_classes, config.feature_dim,
                                       config.class_separation, data_rng, config.cluster_std);
  fed.centers = std::move(blobs.centers);

  RngStream split_rng = root.fork(Purpose::kSplit);
  std::tie(fed.train, fed.test) = train_test_split(blobs.data, config.test_fraction, split_rng);

  RngStream part_rng = root.fork(Purpose::kPartition);
  fed.plan = config.partition_mode == PartitionMode::kIid
                 ? partition_iid(fed.train, config.num_clients, part_rng)
                 : partition_dirichlet(fed.train, config.num_clients, config.dirichlet_p,
                                       config.dirichlet_alpha, part_rng);

  auto noisy = inject_noise(fed.plan, fed.train, config.noise_client_prob, config.noise_lower_bound,
                            root.fork(Purpose::kNoise));
  fed.client_data = std::move(noisy.clients);
  fed.noise = std::move(noisy.noise);
  return fed;
}

std::vector<ClientState> make_clients(const Federation& federation) {
  std::vector<ClientState> clients;
  const int C = federation.train.num_classes;
  for (std::size_t k = 0; k < federation.client_data.size(); ++k) {
    ClientState c;
    c.id = k;
    c.data = federation.client_data[k];
    c.bias = ClientBias::uniform(C);
    c.true_noise_level = federation.noise.client_noise_levels.at(k);
    clients.push_back(std::move(c));
  }
  return clients;
}

ServerState make_server(const RunConfig& config, const std::vector<ClientState>& clients) {
  RngStream init_rng = RngStream(config.seed).fork(Purpose::kModelInit);
  ServerState server;
  server.model = init_params(config.feature_dim, config.model_hidden_sizes, config.num_classes, init_rng);
  std::vector<std::size_t> sizes;
  for (const auto& c : clients) sizes.push_back(c.num_samples());
  server.bank = FilterBank::cold_start(sizes, config.num_classes);
  server.global_filter = GmmParams::cold_start(config.num_classes);
  return server;
}

TrainOptions train_options(const RunConfig& config) {
  TrainOptions o;
  o.epochs = config.local_epochs;
  o.batch_size = config.batch_size;
  o.learning_rate = config.learning_rate;
  o.momentum = config.sgd_momentum;
  o.mixup_alpha = config.mixup_alpha;
  o.reg_weight = config.reg_weight;
  return o;
}

std::vector<std::size_t> select_clients(int num_clients, double omega, RngStream& rng,
                                        const std::vector<std::size_t>& eligible) {
  if (num_clients < 1) throw std::invalid_argument("select_clients: K must be >= 1");
  std::vector<std::size_t> pool = eligible;
  if (pool.empty()) {
    pool.resize(num_clients);
    std::iota(pool.begin(), pool.end(), 0);
  }
  const long wanted = std::clamp<long>(std::lround(omega * num_clients), 1, num_clients);
  const std::size_t m = std::min(static_cast<std::size_t>(wanted), pool.size());
  for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

ModelParams fedavg_aggregate(const std::vector<ModelParams>& models, const std::vector<std::size_t>& weights) {
  if (models.empty() || models.size() != weights.size())
    throw std::invalid_argument("fedavg_aggregate: need one weight per model");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("fedavg_aggregate: total weight is zero");
  ModelParams out = ModelParams::zeros_like(models.front());
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!models[i].same_shape(out)) throw std::invalid_argument("fedavg_aggregate: shape mismatch");
    if (weights[i] == 0) continue;
    const double w = static_cast<double>(weights[i]) / total;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      out.layers[l].weight += w * models[i].layers[l].weight;
      out.layers[l].bias += w * models[i].layers[l].bias;
    }
  }
  return out;
}

RoundRecord fedavg_round(ServerState& server, std::vector<ClientState>& clients, const RoundContext& ctx,
                         const char* phase) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& cfg = ctx.config;
  const int step = server.round + 1;
  RngStream sel_rng = ctx.root.fork(Purpose::kSelection, step);
  const auto selected = select_clients(cfg.num_clients, cfg.client_fraction, sel_rng, eligible_clients(clients));

  const TrainOptions options = train_options(cfg);
  std::vector<ModelParams> locals(selected.size());
  parallel_for(selected.size(), cfg.num_threads, [&](std::size_t i) {
    const ClientState& client = clients[selected[i]];
    RngStream rng = ctx.root.fork(Purpose::kLocalTrain, step, client.id);
    if (options.epochs == 0) {
      locals[i] = server.model;
      return;
    }
    locals[i] = local_train(server.model, training_pairs(client.data), options, rng);
  });

  RoundRecord rec;
  rec.round = step;
  rec.phase = phase;
  std::vector<std::size_t> weights;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const ClientState& client = clients[selected[i]];
    weights.push_back(client.num_samples());
    ClientRoundStats s = base_stats(client);
    if (wants_confusion(cfg, step)) s.confusion = confusion_matrix(locals[i], client.data);
    rec.clients.push_back(std::move(s));
  }
  rec.training_stability = training_stability(locals, server.model);
  server.model = fedavg_aggregate(locals, weights);
  server.round = step;
  rec.test_accuracy = test_accuracy(server.model, ctx.test);
  rec.wall_seconds = seconds_since(start);
  return rec;
}

std::vector<RoundRecord> warmup(ServerState& server, std::vector<ClientState>& clients,
                                const RoundContext& ctx) {
  std::vector<RoundRecord> records;
  const int rounds = ctx.config.warmup_rounds();
  for (int r = 0; r < rounds; ++r) records.push_back(fedavg_round(server, clients, ctx, "warmup"));
  return records;
}

RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients, const RoundContext& ctx) {
  const RunConfig& cfg = ctx.config;
  if (cfg.algorithm_variant == Variant::kFedAvgBaseline) return fedavg_round(server, clients, ctx, "train");

  const auto start = std::chrono::steady_clock::now();
  const int step = server.round + 1;
  RngStream sel_rng = ctx.root.fork(Purpose::kSelection, step);
  const auto selected = select_clients(cfg.num_clients, cfg.client_fraction, sel_rng, eligible_clients(clients));

  // Clients only read the round-t server state; nothing is written back
  // until every update is in.
  std::vector<ClientUpdate> updates(selected.size());
  const ServerState& snapshot = server;
  parallel_for(selected.size(), cfg.num_threads, [&](std::size_t i) {
    updates[i] = feddiv_client_update(snapshot, clients[selected[i]], ctx, step);
  });

  RoundRecord rec;
  rec.round = step;
  rec.phase = "train";
  std::vector<ModelParams> locals;
  std::vector<std::size_t> weights;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    locals.push_back(updates[i].model);
    weights.push_back(clients[selected[i]].num_samples());
  }
  rec.training_stability = training_stability(locals, server.model);
  server.model = fedavg_aggregate(locals, weights);

  for (std::size_t i = 0; i < selected.size(); ++i) {
    ClientState& client = clients[selected[i]];
    client.bias = std::move(updates[i].bias);
    client.noise_estimate = updates[i].stats.estimated_noise_level;
    server.bank.update(client.id, updates[i].local_filter, step);
    rec.clients.push_back(std::move(updates[i].stats));
  }
  switch (cfg.algorithm_variant) {
    case Variant::kFedDiv:
      server.global_filter = aggregate_filters(server.bank);
      break;
    case Variant::kFedDivDegraded:
      server.global_filter = aggregate_filters(server.bank, selected);
      break;
    default:
      break;  // local filters only; the global filter is never consulted
  }
  server.round = step;
  if (cfg.algorithm_variant != Variant::kFedDivLocalFilter) rec.global_filter = server.global_filter;
  rec.test_accuracy = test_accuracy(server.model, ctx.test);
  rec.wall_seconds = seconds_since(start);
  return rec;
}

ExperimentResult run_experiment(const RunConfig& config, const Federation& federation,
                                const RoundCallback& on_round) {
  config.validate();
  std::vector<ClientState> clients = make_clients(federation);
  ServerState server = make_server(config, clients);
  const RngStream root(config.seed);
  const RoundContext ctx{config, root, federation.test};

  ExperimentResult result;
  auto emit = [&](RoundRecord rec) {
    if (on_round) on_round(rec);
    result.rounds.push_back(std::move(rec));
  };

  RoundRecord initial;
  initial.round = 0;
  initial.phase = "initial";
  initial.test_accuracy = test_accuracy(server.model, federation.test);
  emit(std::move(initial));

  for (int r = 0; r < config.warmup_rounds(); ++r) emit(fedavg_round(server, clients, ctx, "warmup"));
  for (int t = 0; t < config.total_rounds; ++t) emit(run_round(server, clients, ctx));

  RunSummary& s = result.summary;
  s.best_test_accuracy = -1.0;
  for (const auto& rec : result.rounds) {
    if (rec.test_accuracy > s.best_test_accuracy) {
      s.best_test_accuracy = rec.test_accuracy;
      s.best_round = rec.round;
    }
    for (const auto& c : rec.clients) {
      s.starved_epochs += c.starved_epochs;
      s.starved_rounds += c.starved_round;
    }
  }
  s.final_test_accuracy = result.rounds.back().test_accuracy;

  std::vector<double> stabilities;
  for (const auto& rec : result.rounds)
    if (rec.phase == "train") stabilities.push_back(rec.training_stability);
  const std::size_t tail = std::min<std::size_t>(10, stabilities.size());
  if (tail > 0)
    s.mean_training_stability_last10 =
        std::accumulate(stabilities.end() - tail, stabilities.end(), 0.0) / static_cast<double>(tail);

  const bool filters = config.algorithm_variant != Variant::kFedAvgBaseline;
  double all = 0.0, noisy = 0.0, clean = 0.0;
  int n_all = 0, n_noisy = 0, n_clean = 0;
  for (const auto& client : clients) {
    FinalClientEval e;
    e.client = client.id;
    e.true_noise_level = client.true_noise_level;
    e.realized_noise_rate = realized_noise_rate(client.data);
    if (filters && client.num_samples() > 0) {
      const GmmParams& filter = config.algorithm_variant == Variant::kFedDivLocalFilter
                                    ? server.bank.entries[client.id].filter
                                    : server.global_filter;
      const auto split = filter_split(filter_losses(server.model, client.data, config), filter,
                                      config.clean_posterior_threshold);
      e.estimated_noise_level = split.noise_level;
      e.filtering_accuracy = filtering_accuracy(clean_flags(split, client.num_samples()), client.data.clean_mask);
      all += e.filtering_accuracy;
      ++n_all;
      if (client.true_noise_level > 0.0) {
        noisy += e.filtering_accuracy;
        ++n_noisy;
      } else {
        clean += e.filtering_accuracy;
        ++n_clean;
      }
    }
    s.final_clients.push_back(e);
  }
  if (n_all > 0) s.mean_filtering_accuracy = all / n_all;
  if (n_noisy > 0) s.mean_filtering_accuracy_noisy_clients = noisy / n_noisy;
  if (n_clean > 0) s.mean_filtering_accuracy_clean_clients = clean / n_clean;

  result.final_server = std::move(server);
  return result;
}

ExperimentResult run_experiment(const RunConfig& config, const RoundCallback& on_round) {
  return run_experiment(config, prepare_federation(config), on_round);
}

}  // namespace feddiv
