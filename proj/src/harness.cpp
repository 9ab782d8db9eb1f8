#include "dynvcg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "dynvcg/export.hpp"

namespace dynvcg {

namespace fs = std::filesystem;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

MdpModel model_from_source(const nlohmann::json& m, const std::string& base_dir) {
  if (m.contains("file")) {
    fs::path path = m.at("file").get<std::string>();
    if (path.is_relative()) path = fs::path(base_dir) / path;
    return load_model(path.string());
  }
  if (m.contains("generator")) {
    return generate_model(generator_from_json(m.at("generator")), m.value("seed", std::uint64_t{0}));
  }
  return model_from_json(m);
}

}  // namespace

double Benchmark::bidders_total() const {
  double total = 0.0;
  for (double u : utilities.bidders) total += u;
  return total;
}

std::vector<std::uint64_t> default_seeds(int count) {
  std::vector<std::uint64_t> out;
  for (int i = 1; i <= count; ++i) out.push_back(static_cast<std::uint64_t>(i));
  return out;
}

ExperimentConfig experiment_from_json(const nlohmann::json& doc, const std::string& base_dir) {
  ExperimentConfig c;
  try {
    c.source = doc;
    require(doc.contains("model"), "config: missing 'model'");
    c.model = model_from_source(doc.at("model"), base_dir);
    const auto violations = validate_model(c.model);
    if (!violations.empty()) throw ConfigError("config: invalid model: " + violations.front().describe());
    const int S = c.model.num_states;
    const int A = c.model.num_actions;
    const int n = c.model.num_bidders;

    const nlohmann::json learner = doc.value("learner", nlohmann::json::object());
    c.learner = learner_config_from_json(learner);
    c.learner.num_states = S;
    c.learner.num_actions = A;
    c.learner.num_bidders = n;
    c.learner.c_max = c.model.c_max;
    c.learner.alpha = learner.value("alpha", c.model.alpha);
    if (!learner.contains("delta")) {
      const auto cal = calibrate_delta(c.model.kernel, c.model.total_rewards(), c.learner.epsilon);
      c.learner.delta = cal.delta;
      c.calibrated_delta = true;
    }
    c.learner.validate();

    if (doc.contains("bidders")) {
      const auto& list = doc.at("bidders");
      require(list.is_array() && static_cast<int>(list.size()) == n,
              "config: 'bidders' must list one strategy per bidder (" + std::to_string(n) + ")");
      for (const auto& b : list) c.bidders.push_back(BidderStrategy::from_json(b, S, A));
    } else {
      c.bidders.assign(n, BidderStrategy::truthful());
    }

    c.horizon = doc.value("horizon", 0L);
    c.episodes = doc.value("episodes", 0L);
    require(c.horizon >= 0 && c.episodes >= 0, "config: horizon and episodes must be nonnegative");
    require(c.horizon >= 1 || c.episodes >= 1, "config: need horizon >= 1 or episodes >= 1");

    if (doc.contains("seeds")) {
      c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      const int count = doc.value("num_seeds", 20);
      require(count >= 1, "config: num_seeds must be positive");
      const auto base = doc.value("base_seed", std::uint64_t{1});
      for (int i = 0; i < count; ++i) c.seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
    require(!c.seeds.empty(), "config: empty seed list");
    c.checkpoints = doc.value("checkpoints", std::vector<long>{});

    const nlohmann::json output = doc.value("output", nlohmann::json::object());
    c.output_dir = output.value("dir", c.output_dir);
    c.format = output.value("format", c.format);
    c.write_rounds = output.value("rounds", c.write_rounds);
    require(c.format == "csv" || c.format == "json", "config: output format must be csv or json");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return experiment_from_json(doc, fs::path(path).parent_path().string());
}

std::string config_hash(const ExperimentConfig& config) {
  nlohmann::json canonical;
  canonical["model"] = model_to_json(config.model);
  canonical["learner"] = learner_config_to_json(config.learner);
  nlohmann::json bidders = nlohmann::json::array();
  for (const auto& b : config.bidders) bidders.push_back(b.to_json());
  canonical["bidders"] = std::move(bidders);
  canonical["horizon"] = config.horizon;
  canonical["episodes"] = config.episodes;
  canonical["checkpoints"] = config.checkpoints;

  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : canonical.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Benchmark compute_benchmark(const MdpModel& model) {
  Benchmark out;
  out.mechanism = offline_mechanism(BidProfile::truthful(model), model.seller_rewards(), model.kernel);
  out.utilities = average_utilities(out.mechanism, model.bidder_rewards(), model.seller_rewards(), model.kernel);
  return out;
}

RoundDecision ClairvoyantSeller::act(int s, Rng& rng) {
  RoundDecision out;
  out.phase = Phase::kStationary;
  out.action = mechanism_.allocation.sample(s, rng);
  for (const auto& p : mechanism_.payments) out.charges.push_back(p(s, out.action));
  return out;
}

namespace {

EpisodeDiagnostics open_episode(const LearnerState& st) {
  EpisodeDiagnostics d;
  d.episode = st.episode;
  d.start = st.episode_start;
  d.schedule = st.schedule;
  return d;
}

void close_episode(EpisodeDiagnostics& d, const LearnerState& st, const MdpModel& model) {
  d.complete = true;
  d.kernel_in_band = st.band.contains(model.kernel, 1e-12);
  d.rewards_in_bounds = true;
  for (int i = 0; i <= model.num_bidders; ++i) {
    const auto& truth = model.reward_means[i].array();
    if ((truth < st.reward_lcb[i].array() - 1e-12).any() || (truth > st.reward_ucb[i].array() + 1e-12).any()) {
      d.rewards_in_bounds = false;
    }
  }
  d.min_payment_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < model.num_bidders; ++i) {
    d.min_payment_gap =
        std::min(d.min_payment_gap, (st.payments_seller_favorable[i] - st.payments_bidder_favorable[i]).minCoeff());
  }
  if (model.num_bidders == 0) d.min_payment_gap = 0.0;
  d.min_policy_entry = st.policy.matrix().minCoeff();
}

}  // namespace

RunResult run_online(const MdpModel& model, Seller& seller, const std::vector<BidderStrategy>& bidders,
                     const Benchmark& benchmark, std::uint64_t seed, const RunOptions& options) {
  const int n = model.num_bidders;
  if (static_cast<int>(bidders.size()) != n) throw ConfigError("run_online: one strategy per bidder required");
  const auto started = std::chrono::steady_clock::now();

  SimState sim{1, 0, make_stream(seed, 0)};
  sim.state = std::uniform_int_distribution<int>(0, model.num_states - 1)(sim.rng);
  Rng seller_rng = make_stream(seed, 1);
  std::vector<Rng> bidder_rngs;
  for (int i = 0; i < n; ++i) bidder_rngs.push_back(make_stream(seed, 2 + static_cast<std::uint64_t>(i)));

  auto* learner = dynamic_cast<OnlineLearner*>(&seller);
  const double w_star = benchmark.utilities.welfare;
  const double u0_star = benchmark.utilities.seller;
  const double ub_star = benchmark.bidders_total();
  const std::set<long> extra(options.extra_checkpoints.begin(), options.extra_checkpoints.end());

  RunResult out;
  out.seed = seed;
  CompensatedSum welfare_sum;
  CompensatedSum seller_sum;
  std::vector<CompensatedSum> bidder_sums(n);

  auto checkpoint = [&](long t) {
    if (!out.regrets.empty() && out.regrets.back().t == t) return;
    CompensatedSum bidders_total;
    for (const auto& b : bidder_sums) bidders_total.add(b.value());
    const double td = static_cast<double>(t);
    out.regrets.push_back({t, td * w_star - welfare_sum.value(), td * u0_star - seller_sum.value(),
                           td * ub_star - bidders_total.value()});
  };

  std::optional<EpisodeDiagnostics> current;
  if (learner) current = open_episode(learner->state());

  long episodes_done = 0;
  RoundRecord rec;
  rec.rewards.resize(n + 1);
  rec.reports.resize(n);
  rec.payments.resize(n);
  rec.bidder_utilities.resize(n);
  std::vector<double> reports(n);

  while (options.horizon > 0 || options.max_episodes > 0) {
    if (options.horizon > 0 && sim.t > options.horizon) break;
    if (options.max_episodes > 0 && episodes_done >= options.max_episodes) break;

    const long t = sim.t;
    const int s = sim.state;
    const long k = seller.episode();
    const RoundDecision decision = seller.act(s, seller_rng);
    const StepOutcome outcome = step(model, sim, decision.action);
    for (int i = 0; i < n; ++i) {
      reports[i] = bidders[i].report({t, k, s, decision.action, outcome.rewards[i + 1]}, bidder_rngs[i]);
    }
    seller.observe(s, decision.action, outcome.next_state, outcome.rewards[0], reports);

    rec.t = t;
    rec.episode = k;
    rec.phase = decision.phase;
    rec.s = s;
    rec.a = decision.action;
    double welfare = 0.0;
    double seller_u = outcome.rewards[0];
    for (int j = 0; j <= n; ++j) {
      rec.rewards[j] = outcome.rewards[j];
      welfare += outcome.rewards[j];
    }
    for (int i = 0; i < n; ++i) {
      rec.reports[i] = reports[i];
      rec.payments[i] = decision.charges[i];
      rec.bidder_utilities[i] = outcome.rewards[i + 1] - decision.charges[i];
      seller_u += decision.charges[i];
      bidder_sums[i].add(rec.bidder_utilities[i]);
    }
    rec.seller_utility = seller_u;
    rec.welfare = welfare;
    welfare_sum.add(welfare);
    seller_sum.add(seller_u);
    if (options.sink) options.sink(rec);
    out.rounds = t;

    bool boundary = false;
    if (seller.episode_complete()) {
      if (learner) {
        const auto& st = learner->state();
        current->unvisited_pairs = static_cast<int>((st.episode_visits.array() == 0).count());
        seller.end_episode();
        close_episode(*current, learner->state(), model);
        out.episodes.push_back(*current);
        current = open_episode(learner->state());
      } else {
        seller.end_episode();
      }
      ++episodes_done;
      boundary = true;
    }
    if (boundary || (t & (t - 1)) == 0 || extra.count(t) || t == options.horizon) checkpoint(t);
  }
  if (out.rounds > 0) checkpoint(out.rounds);
  if (current && out.rounds >= current->start) out.episodes.push_back(*current);

  for (const auto& b : bidder_sums) out.bidder_utility_totals.push_back(b.value());
  out.seller_utility_total = seller_sum.value();
  out.welfare_total = welfare_sum.value();
  out.seed_runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

RunResult run_seed(const ExperimentConfig& config, const Benchmark& benchmark, std::uint64_t seed,
                   const RoundSink& sink) {
  OnlineLearner learner(config.learner);
  RunOptions options;
  options.horizon = config.horizon;
  options.max_episodes = config.episodes;
  options.extra_checkpoints = config.checkpoints;
  options.sink = sink;
  return run_online(config.model, learner, config.bidders, benchmark, seed, options);
}

std::vector<RegretPoint> mean_regrets(const std::vector<RunResult>& runs) {
  std::vector<RegretPoint> out;
  if (runs.empty()) return out;
  std::vector<std::map<long, RegretPoint>> by_t;
  for (const auto& r : runs) {
    std::map<long, RegretPoint> m;
    for (const auto& p : r.regrets) m[p.t] = p;
    by_t.push_back(std::move(m));
  }
  for (const auto& p : runs.front().regrets) {
    RegretPoint mean{p.t, 0.0, 0.0, 0.0};
    bool shared = true;
    for (const auto& m : by_t) {
      auto it = m.find(p.t);
      if (it == m.end()) {
        shared = false;
        break;
      }
      mean.welfare += it->second.welfare;
      mean.seller += it->second.seller;
      mean.bidders += it->second.bidders;
    }
    if (!shared) continue;
    const double count = static_cast<double>(runs.size());
    mean.welfare /= count;
    mean.seller /= count;
    mean.bidders /= count;
    out.push_back(mean);
  }
  return out;
}

double loglog_slope(const std::vector<RegretPoint>& curve) {
  if (curve.empty()) return std::numeric_limits<double>::quiet_NaN();
  const long t_max = curve.back().t;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& p : curve) {
    if (p.t * 10 < t_max || p.welfare <= 0.0) continue;
    const double x = std::log(static_cast<double>(p.t));
    const double y = std::log(p.welfare);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  const double denom = m * sxx - sx * sx;
  if (m < 2 || denom <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (m * sxy - sx * sy) / denom;
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool write) {
  if (config.seeds.empty()) throw ConfigError("run_experiment: no seeds");
  ExperimentResult result;
  result.config_hash = config_hash(config);
  result.benchmark = compute_benchmark(config.model);
  result.runs.resize(config.seeds.size());

  if (write) {
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + config.output_dir + "': " + ec.message());
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(config.seeds.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        const auto seed = config.seeds[i];
        std::unique_ptr<RoundWriter> writer;
        RoundSink sink;
        if (write && config.write_rounds) {
          const auto path = (fs::path(config.output_dir) / ("rounds_seed" + std::to_string(seed) + "." + config.format));
          writer = std::make_unique<RoundWriter>(path.string(), config.model.num_bidders, config.format);
          sink = [&writer](const RoundRecord& r) { writer->write(r); };
        }
        result.runs[i] = run_seed(config, result.benchmark, seed, sink);
        if (writer) writer->close();
        spdlog::info("seed {} done: {} rounds, {} episodes, {:.2f}s", seed, result.runs[i].rounds,
                     result.runs[i].episodes.size(), result.runs[i].seed_runtime_seconds);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), config.seeds.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  result.mean_regrets = mean_regrets(result.runs);
  for (const auto& d : result.runs.front().episodes) result.schedule.push_back(d.schedule);

  if (write) {
    const fs::path dir(config.output_dir);
    if (config.format == "csv") {
      write_regret_csv((dir / "regrets.csv").string(), result.runs, result.mean_regrets);
    } else {
      nlohmann::json regrets = nlohmann::json::array();
      for (const auto& r : result.runs) {
        for (const auto& p : r.regrets) {
          auto row = regret_to_json(p);
          row["seed"] = r.seed;
          regrets.push_back(std::move(row));
        }
      }
      for (const auto& p : result.mean_regrets) {
        auto row = regret_to_json(p);
        row["seed"] = "mean";
        regrets.push_back(std::move(row));
      }
      write_json((dir / "regrets.json").string(), regrets);
    }
    write_json((dir / "summary.json").string(), summary_json(config, result));
  }
  return result;
}

OfflineReport run_offline(const MdpModel& model, const std::optional<BidProfile>& bids, long trajectory_length,
                          std::uint64_t seed) {
  OfflineReport out;
  const BidProfile profile = bids.value_or(BidProfile::truthful(model));
  if (profile.num_bidders() != model.num_bidders) throw ConfigError("run_offline: one bid table per bidder required");
  out.mechanism = offline_mechanism(profile, model.seller_rewards(), model.kernel);
  out.exact = average_utilities(out.mechanism, model.bidder_rewards(), model.seller_rewards(), model.kernel);
  out.identity = seller_utility_identity(out.mechanism, model.bidder_rewards(), model.seller_rewards(), model.kernel);
  out.trajectory_length = std::max(0L, trajectory_length);
  out.empirical.bidders.assign(model.num_bidders, 0.0);
  out.empirical_payments.assign(model.num_bidders, 0.0);
  if (out.trajectory_length == 0) return out;

  std::vector<CompensatedSum> payments(model.num_bidders);
  RunOptions options;
  options.horizon = out.trajectory_length;
  options.sink = [&payments](const RoundRecord& r) {
    for (std::size_t i = 0; i < payments.size(); ++i) payments[i].add(r.payments[i]);
  };
  ClairvoyantSeller seller(out.mechanism);
  const Benchmark benchmark{out.mechanism, out.exact};
  const std::vector<BidderStrategy> truthful(model.num_bidders, BidderStrategy::truthful());
  const RunResult run = run_online(model, seller, truthful, benchmark, seed, options);

  const double T = static_cast<double>(out.trajectory_length);
  out.empirical.welfare = run.welfare_total / T;
  out.empirical.seller = run.seller_utility_total / T;
  for (int i = 0; i < model.num_bidders; ++i) {
    out.empirical.bidders[i] = run.bidder_utility_totals[i] / T;
    out.empirical_payments[i] = payments[i].value() / T;
  }
  return out;
}

std::vector<double> deviation_gain(const ExperimentConfig& config, int bidder, const BidderStrategy& deviation,
                                   const std::vector<long>& horizons) {
  if (bidder < 0 || bidder >= config.model.num_bidders) throw ConfigError("deviation_gain: bidder out of range");
  if (horizons.empty()) return {};
  const long t_max = *std::max_element(horizons.begin(), horizons.end());
  const Benchmark benchmark = compute_benchmark(config.model);

  auto utility_at = [&](const std::vector<BidderStrategy>& strategies, std::uint64_t seed) {
    std::map<long, double> at;
    for (long h : horizons) at[h] = 0.0;
    CompensatedSum total;
    RunOptions options;
    options.horizon = t_max;
    options.sink = [&](const RoundRecord& r) {
      total.add(r.bidder_utilities[bidder]);
      if (auto it = at.find(r.t); it != at.end()) it->second = total.value();
    };
    OnlineLearner learner(config.learner);
    run_online(config.model, learner, strategies, benchmark, seed, options);
    return at;
  };

  std::vector<BidderStrategy> deviated = config.bidders;
  deviated[bidder] = deviation;
  std::vector<double> gains(horizons.size(), 0.0);
  for (auto seed : config.seeds) {
    const auto honest = utility_at(config.bidders, seed);
    const auto dev = utility_at(deviated, seed);
    for (std::size_t j = 0; j < horizons.size(); ++j) {
      const long h = horizons[j];
      gains[j] += (dev.at(h) - honest.at(h)) / static_cast<double>(h);
    }
  }
  for (auto& g : gains) g /= static_cast<double>(config.seeds.size());
  return gains;
}

}  // namespace dynvcg
