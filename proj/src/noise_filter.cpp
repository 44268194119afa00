#include "feddiv/noise_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace feddiv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * variance) + d * d / variance);
}

double log_weight(double w) { return w > 0.0 ? std::log(w) : kNegInf; }

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log pi_g + log N(x; mu_g, var_g) for both components.
std::array<double, 2> joint_log(double x, const GmmParams& p) {
  return {log_weight(p.weight[0]) + log_normal(x, p.mean[0], p.variance[0]),
          log_weight(p.weight[1]) + log_normal(x, p.mean[1], p.variance[1])};
}

void order_components(GmmParams& p) {
  if (p.mean[0] > p.mean[1]) {
    std::swap(p.mean[0], p.mean[1]);
    std::swap(p.variance[0], p.variance[1]);
    std::swap(p.weight[0], p.weight[1]);
  }
}

}  // namespace

void GmmParams::validate() const {
  const double total = weight[0] + weight[1];
  if (std::abs(total - 1.0) > 1e-9) throw std::logic_error("GmmParams: weights do not sum to 1");
  for (int g = 0; g < 2; ++g) {
    if (!(weight[g] >= 0.0 && weight[g] <= 1.0)) throw std::logic_error("GmmParams: weight outside [0,1]");
    if (!(variance[g] >= kVarianceFloor)) throw std::logic_error("GmmParams: variance below floor");
    if (!std::isfinite(mean[g])) throw std::logic_error("GmmParams: non-finite mean");
  }
  if (mean[0] > mean[1]) throw std::logic_error("GmmParams: clean component must have the smaller mean");
}

double GmmParams::log_likelihood(const std::vector<double>& losses) const {
  double ll = 0.0;
  for (double x : losses) {
    const auto j = joint_log(x, *this);
    ll += log_add(j[0], j[1]);
  }
  return ll;
}

GmmParams GmmParams::cold_start(int num_classes) {
  const double logc = std::log(static_cast<double>(num_classes));
  GmmParams p;
  p.mean = {0.5 * logc, 2.0 * logc};
  p.variance = {1.0, 1.0};
  p.weight = {0.5, 0.5};
  return p;
}

double gmm_posterior_clean(double loss, const GmmParams& filter) {
  const auto j = joint_log(loss, filter);
  if (j[0] == kNegInf && j[1] == kNegInf) return 0.5;
  if (j[1] == kNegInf) return 1.0;
  if (j[0] == kNegInf) return 0.0;
  // Logistic of the log-odds; stable in both tails.
  const double log_odds = j[0] - j[1];
  if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
  const double e = std::exp(log_odds);
  return e / (1.0 + e);
}

GmmFit fit_local_gmm(const std::vector<double>& losses, const GmmParams& init, int max_iters,
                     double tolerance) {
  if (losses.empty()) throw std::invalid_argument("fit_local_gmm: no losses");
  if (max_iters < 1) throw std::invalid_argument("fit_local_gmm: max_iters must be >= 1");
  const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
  GmmFit fit;
  if (*lo == *hi) {
    fit.params.mean = {*lo, *lo};
    fit.params.variance = {kVarianceFloor, kVarianceFloor};
    fit.params.weight = {1.0, 0.0};
    fit.degenerate = true;
    fit.converged = true;
    fit.log_likelihood.push_back(fit.params.log_likelihood(losses));
    return fit;
  }

  const double n = static_cast<double>(losses.size());
  GmmParams p = init;
  for (int g = 0; g < 2; ++g) p.variance[g] = std::max(p.variance[g], kVarianceFloor);
  std::vector<double> resp(losses.size());  // responsibility of component 0

  for (int iter = 0; iter < max_iters; ++iter) {
    // E step
    double ll = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const auto j = joint_log(losses[i], p);
      const double lse = log_add(j[0], j[1]);
      ll += lse;
      resp[i] = j[0] == kNegInf ? 0.0 : std::exp(j[0] - lse);
    }
    fit.log_likelihood.push_back(ll);

    // M step
    GmmParams next = p;
    std::array<double, 2> mass{0.0, 0.0};
    std::array<double, 2> weighted_sum{0.0, 0.0};
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const double r0 = resp[i];
      const double r1 = 1.0 - r0;
      mass[0] += r0;
      mass[1] += r1;
      weighted_sum[0] += r0 * losses[i];
      weighted_sum[1] += r1 * losses[i];
    }
    for (int g = 0; g < 2; ++g) {
      if (mass[g] > 0.0) next.mean[g] = weighted_sum[g] / mass[g];
    }
    std::array<double, 2> sq{0.0, 0.0};
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const double d0 = losses[i] - next.mean[0];
      const double d1 = losses[i] - next.mean[1];
      sq[0] += resp[i] * d0 * d0;
      sq[1] += (1.0 - resp[i]) * d1 * d1;
    }
    for (int g = 0; g < 2; ++g) {
      if (mass[g] > 0.0) next.variance[g] = std::max(sq[g] / mass[g], kVarianceFloor);
    }
    next.weight[0] = mass[0] / n;
    next.weight[1] = 1.0 - next.weight[0];

    double delta = 0.0;
    for (int g = 0; g < 2; ++g) {
      delta = std::max(delta, std::abs(next.mean[g] - p.mean[g]));
      delta = std::max(delta, std::abs(next.variance[g] - p.variance[g]));
      delta = std::max(delta, std::abs(next.weight[g] - p.weight[g]));
    }
    p = next;
    fit.iterations = iter + 1;
    if (delta < tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.log_likelihood.push_back(p.log_likelihood(losses));
  order_components(p);
  fit.params = p;
  return fit;
}

FilterBank FilterBank::cold_start(const std::vector<std::size_t>& client_sizes, int num_classes) {
  FilterBank bank;
  for (std::size_t n : client_sizes) bank.entries.push_back({GmmParams::cold_start(num_classes), n, -1});
  return bank;
}

void FilterBank::update(std::size_t client, const GmmParams& filter, int round) {
  auto& e = entries.at(client);
  e.filter = filter;
  e.last_round = round;
}

GmmParams aggregate_filters(const FilterBank& bank, const std::vector<std::size_t>& clients) {
  double total = 0.0;
  for (std::size_t k : clients) total += static_cast<double>(bank.entries.at(k).num_samples);
  if (!(total > 0.0)) throw std::invalid_argument("aggregate_filters: total sample weight is zero");
  GmmParams out;
  out.mean = {0.0, 0.0};
  out.variance = {0.0, 0.0};
  out.weight = {0.0, 0.0};
  for (std::size_t k : clients) {
    const auto& e = bank.entries[k];
    if (e.num_samples == 0) continue;
    const double w = static_cast<double>(e.num_samples) / total;
    for (int g = 0; g < 2; ++g) {
      out.mean[g] += w * e.filter.mean[g];
      out.variance[g] += w * e.filter.variance[g];
      out.weight[g] += w * e.filter.weight[g];
    }
  }
  return out;
}

GmmParams aggregate_filters(const FilterBank& bank) {
  std::vector<std::size_t> all(bank.entries.size());
  std::iota(all.begin(), all.end(), 0);
  return aggregate_filters(bank, all);
}

FilterSplit filter_split(const std::vector<double>& losses, const GmmParams& filter,
                         double threshold) {
  FilterSplit split;
  for (std::size_t i = 0; i < losses.size(); ++i)
    (gmm_posterior_clean(losses[i], filter) >= threshold ? split.clean : split.noisy).push_back(i);
  split.noise_level =
      losses.empty() ? 0.0 : static_cast<double>(split.noisy.size()) / static_cast<double>(losses.size());
  return split;
}

std::vector<Relabeled> relabel(const LabeledDataset& data, const std::vector<std::size_t>& noisy,
                               const ModelParams& global_model, double zeta) {
  std::vector<Relabeled> out;
  for (std::size_t i : noisy) {
    const Vector p = predict_proba(global_model, data.features.at(i));
    const int y = argmax(p);
    if (p[y] >= zeta) out.push_back({i, y});
  }
  return out;
}

}  // namespace feddiv
