#include "dynvcg/online_vcg.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "dynvcg/offline_vcg.hpp"

namespace dynvcg {

std::string to_string(PaymentVariant variant) {
  return variant == PaymentVariant::kSellerFavorable ? "seller_favorable" : "bidder_favorable";
}

PaymentVariant payment_variant_from_string(const std::string& name) {
  if (name == "seller_favorable") return PaymentVariant::kSellerFavorable;
  if (name == "bidder_favorable") return PaymentVariant::kBidderFavorable;
  throw ConfigError("unknown payment variant '" + name + "'");
}

std::string to_string(Phase phase) { return phase == Phase::kMixing ? "mixing" : "stationary"; }

void LearnerConfig::validate() const {
  auto open_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (num_states < 1 || num_actions < 1 || num_bidders < 0) {
    throw ConfigError("learner: S, A must be positive and n nonnegative");
  }
  if (!open_unit(epsilon)) throw ConfigError("learner: epsilon must lie in (0, 1)");
  if (!open_unit(delta)) throw ConfigError("learner: delta must lie in (0, 1)");
  if (!open_unit(zeta)) throw ConfigError("learner: zeta must lie in (0, 1)");
  if (delta > 1.0 / (num_states * num_actions)) throw ConfigError("learner: delta exceeds 1/(S*A)");
  if (!(alpha > 0.0) || alpha * num_states > 1.0) throw ConfigError("learner: need 0 < alpha and alpha*S <= 1");
  if (!(c_max > 0.0)) throw ConfigError("learner: c_max must be positive");
}

EpisodeSchedule episode_lengths(long k, double alpha, int num_states, int num_actions, double delta,
                                double zeta) {
  const double kk = static_cast<double>(k);
  EpisodeSchedule out;
  out.mixing = std::max(1L, static_cast<long>(std::ceil(std::log(kk) / (alpha * num_states))));
  const double log_term = std::log(num_actions * num_states * kk / zeta);
  out.stationary = static_cast<long>(std::ceil(std::max(4.0, std::sqrt(kk)) * log_term / (alpha * delta)));
  return out;
}

double kernel_radius(double empirical, std::int64_t visits, double log_term) {
  const double m = static_cast<double>(std::max<std::int64_t>(1, visits - 1));
  return 2.0 * std::sqrt(empirical * log_term / m) + 14.0 * log_term / (3.0 * m);
}

double reward_radius(std::int64_t visits, double log_term) {
  return std::sqrt(2.0 * log_term / static_cast<double>(std::max<std::int64_t>(1, visits)));
}

namespace {

LearnerState initial_state(const LearnerConfig& c) {
  const int S = c.num_states;
  const int A = c.num_actions;
  const int n = c.num_bidders;
  LearnerState st;
  st.schedule = episode_lengths(1, c.alpha, S, A, c.delta, c.zeta);
  st.visits = CountTable::Zero(S, A);
  st.transitions = CountTable::Zero(S * A, S);
  st.episode_visits = CountTable::Zero(S, A);
  st.reward_sums.assign(n + 1, RewardTable::Zero(S, A));
  st.empirical_kernel = Eigen::MatrixXd::Zero(S * A, S);
  st.band = KernelBand::vacuous(S, A);
  st.reward_lcb.assign(n + 1, RewardTable::Zero(S, A));
  st.reward_ucb.assign(n + 1, RewardTable::Ones(S, A));
  st.reward_ucb[0].setConstant(c.c_max);
  st.occupancy = OccupancyMeasure::uniform(S, A);
  st.policy = induce(st.occupancy).policy;
  st.payments_seller_favorable.assign(n, RewardTable::Ones(S, A));
  st.payments_bidder_favorable.assign(n, RewardTable::Ones(S, A));
  return st;
}

nlohmann::json counts_to_json(const CountTable& t) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < t.cols(); ++c) row.push_back(t(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

CountTable counts_from_json(const nlohmann::json& doc, int rows, int cols, const std::string& what) {
  if (!doc.is_array() || static_cast<int>(doc.size()) != rows) throw ConfigError(what + ": bad shape");
  CountTable out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!doc[r].is_array() || static_cast<int>(doc[r].size()) != cols) throw ConfigError(what + ": bad shape");
    for (int c = 0; c < cols; ++c) out(r, c) = doc[r][c].get<std::int64_t>();
  }
  return out;
}

nlohmann::json tables_to_json(const std::vector<RewardTable>& tables) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : tables) out.push_back(table_to_json(t));
  return out;
}

std::vector<RewardTable> tables_from_json(const nlohmann::json& doc, std::size_t count, int rows, int cols,
                                          const std::string& what) {
  if (!doc.is_array() || doc.size() != count) throw ConfigError(what + ": wrong number of tables");
  std::vector<RewardTable> out;
  for (const auto& t : doc) out.push_back(table_from_json(t, rows, cols, what));
  return out;
}

}  // namespace

nlohmann::json learner_config_to_json(const LearnerConfig& c) {
  return {{"epsilon", c.epsilon}, {"delta", c.delta},       {"zeta", c.zeta},
          {"alpha", c.alpha},     {"c_max", c.c_max},       {"variant", to_string(c.variant)},
          {"S", c.num_states},    {"A", c.num_actions},     {"n", c.num_bidders}};
}

LearnerConfig learner_config_from_json(const nlohmann::json& doc) {
  LearnerConfig c;
  try {
    c.epsilon = doc.value("epsilon", c.epsilon);
    c.delta = doc.value("delta", c.delta);
    c.zeta = doc.value("zeta", c.zeta);
    c.alpha = doc.value("alpha", c.alpha);
    c.c_max = doc.value("c_max", c.c_max);
    c.variant = payment_variant_from_string(doc.value("variant", std::string("seller_favorable")));
    c.num_states = doc.value("S", 0);
    c.num_actions = doc.value("A", 0);
    c.num_bidders = doc.value("n", 0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("learner config: ") + e.what());
  }
  return c;
}

OnlineLearner::OnlineLearner(LearnerConfig config) : config_(config) {
  config_.validate();
  state_ = initial_state(config_);
}

OnlineLearner::OnlineLearner(LearnerConfig config, LearnerState state)
    : config_(config), state_(std::move(state)) {
  config_.validate();
}

const std::vector<RewardTable>& OnlineLearner::active_payments() const {
  return config_.variant == PaymentVariant::kSellerFavorable ? state_.payments_seller_favorable
                                                             : state_.payments_bidder_favorable;
}

RoundDecision OnlineLearner::act(int s, Rng& rng) {
  RoundDecision out;
  out.phase = state_.phase;
  out.action = state_.policy.sample(s, rng);
  out.charges.assign(config_.num_bidders, 0.0);
  if (out.phase == Phase::kStationary) {
    const auto& pay = active_payments();
    for (int i = 0; i < config_.num_bidders; ++i) out.charges[i] = pay[i](s, out.action);
  }

  ++state_.rounds;
  ++state_.phase_round;
  if (state_.phase == Phase::kMixing && state_.phase_round >= state_.schedule.mixing) {
    state_.phase = Phase::kStationary;
    state_.phase_round = 0;
  }
  return out;
}

void OnlineLearner::observe(int s, int a, int next, double seller_reward, std::span<const double> reports) {
  if (static_cast<int>(reports.size()) != config_.num_bidders) {
    throw std::invalid_argument("observe: one report per bidder required");
  }
  ++state_.visits(s, a);
  ++state_.episode_visits(s, a);
  ++state_.transitions(s * config_.num_actions + a, next);
  state_.reward_sums[0](s, a) += std::clamp(seller_reward, 0.0, config_.c_max);
  for (int i = 0; i < config_.num_bidders; ++i) {
    double r = reports[i];
    if (!(r >= 0.0 && r <= 1.0)) {
      if (state_.clipped_reports++ == 0) {
        spdlog::warn("bidder {} reported {} outside [0, 1]; clipping (further clips are counted silently)",
                     i + 1, r);
      }
      r = std::isnan(r) ? 0.0 : std::clamp(r, 0.0, 1.0);
    }
    state_.reward_sums[i + 1](s, a) += r;
  }
}

bool OnlineLearner::episode_complete() const {
  return state_.phase == Phase::kStationary && state_.phase_round >= state_.schedule.stationary;
}

void OnlineLearner::update_band() {
  const int S = config_.num_states;
  const int A = config_.num_actions;
  const double k = static_cast<double>(state_.episode);
  const double log_term = std::log(A * S * k / config_.zeta);

  Eigen::MatrixXd radius(S * A, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int r = s * A + a;
      const auto n = state_.visits(s, a);
      const double denom = static_cast<double>(std::max<std::int64_t>(1, n));
      for (int x = 0; x < S; ++x) {
        state_.empirical_kernel(r, x) = static_cast<double>(state_.transitions(r, x)) / denom;
        radius(r, x) = kernel_radius(state_.empirical_kernel(r, x), n, log_term);
      }
    }
  }

  const KernelBand fresh = KernelBand::around(state_.empirical_kernel, radius);
  KernelBand next = state_.band.intersect(fresh);
  // A row that no stochastic vector fits keeps its previous bounds.
  for (Eigen::Index r = 0; r < next.lower.rows(); ++r) {
    if (!next.row_feasible(r)) {
      next.lower.row(r) = state_.band.lower.row(r);
      next.upper.row(r) = state_.band.upper.row(r);
      ++state_.band_rows_kept;
    }
  }
  state_.band = std::move(next);
}

void OnlineLearner::update_rewards() {
  const int S = config_.num_states;
  const int A = config_.num_actions;
  const int n = config_.num_bidders;
  const double k = static_cast<double>(state_.episode);
  const double log_term = std::log(A * S * k * std::max(1, n) / config_.zeta);

  for (int i = 0; i <= n; ++i) {
    const double cap = i == 0 ? config_.c_max : 1.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const auto visits = state_.visits(s, a);
        const double mean = state_.reward_sums[i](s, a) / static_cast<double>(std::max<std::int64_t>(1, visits));
        const double width = cap * reward_radius(visits, log_term);
        state_.reward_ucb[i](s, a) = std::min(cap, mean + width);
        state_.reward_lcb[i](s, a) = std::max(0.0, mean - width);
      }
    }
  }
}

void OnlineLearner::update_mechanism() {
  const int S = config_.num_states;
  const int A = config_.num_actions;
  const int n = config_.num_bidders;
  const ConstraintSystem polytope =
      build_constraints(PolytopeSpec::shrunk_confidence(S, A, state_.band, config_.delta));

  auto solve = [&](const RewardTable& objective, const char* what) {
    LpSolution sol = maximize(objective, polytope);
    if (!sol.optimal()) {
      throw ConfigError("episode " + std::to_string(state_.episode) + ": " + what +
                        " LP infeasible over the shrunk confidence polytope; delta " +
                        std::to_string(config_.delta) + " is too large for the current band");
    }
    return sol;
  };

  const LpSolution welfare = solve(sum_excluding(state_.reward_ucb, -1), "allocation");
  state_.occupancy = welfare.q;
  state_.policy = induce(welfare.q).policy;

  for (int i = 1; i <= n; ++i) {
    const RewardTable ucb_others = sum_excluding(state_.reward_ucb, i);
    const RewardTable lcb_others = sum_excluding(state_.reward_lcb, i);
    const double optimistic = solve(ucb_others, "payment").objective_value;
    const double pessimistic = solve(lcb_others, "payment").objective_value;
    state_.payments_seller_favorable[i - 1] = RewardTable::Constant(S, A, optimistic) - lcb_others;
    state_.payments_bidder_favorable[i - 1] = RewardTable::Constant(S, A, pessimistic) - ucb_others;
  }
}

void OnlineLearner::end_episode() {
  if (!episode_complete()) throw std::logic_error("end_episode: stationary phase not finished");
  update_band();
  update_rewards();
  update_mechanism();

  state_.episode_start += state_.schedule.total();
  ++state_.episode;
  state_.schedule = episode_lengths(state_.episode, config_.alpha, config_.num_states, config_.num_actions,
                                    config_.delta, config_.zeta);
  state_.phase = Phase::kMixing;
  state_.phase_round = 0;
  state_.episode_visits.setZero();
}

nlohmann::json OnlineLearner::checkpoint() const {
  const auto& st = state_;
  return {
      {"config", learner_config_to_json(config_)},
      {"episode", st.episode},
      {"episode_start", st.episode_start},
      {"rounds", st.rounds},
      {"phase", to_string(st.phase)},
      {"phase_round", st.phase_round},
      {"visits", counts_to_json(st.visits)},
      {"transitions", counts_to_json(st.transitions)},
      {"episode_visits", counts_to_json(st.episode_visits)},
      {"reward_sums", tables_to_json(st.reward_sums)},
      {"empirical_kernel", table_to_json(st.empirical_kernel)},
      {"band_lower", table_to_json(st.band.lower)},
      {"band_upper", table_to_json(st.band.upper)},
      {"reward_ucb", tables_to_json(st.reward_ucb)},
      {"reward_lcb", tables_to_json(st.reward_lcb)},
      {"occupancy", table_to_json(st.occupancy.matrix())},
      {"policy", table_to_json(st.policy.matrix())},
      {"payments_seller_favorable", tables_to_json(st.payments_seller_favorable)},
      {"payments_bidder_favorable", tables_to_json(st.payments_bidder_favorable)},
      {"band_rows_kept", st.band_rows_kept},
      {"clipped_reports", st.clipped_reports},
  };
}

OnlineLearner OnlineLearner::restore(const nlohmann::json& doc) {
  try {
    const LearnerConfig c = learner_config_from_json(doc.at("config"));
    c.validate();
    const int S = c.num_states;
    const int A = c.num_actions;
    const auto n = static_cast<std::size_t>(c.num_bidders);
    LearnerState st;
    st.episode = doc.at("episode").get<long>();
    st.episode_start = doc.at("episode_start").get<long>();
    st.rounds = doc.at("rounds").get<long>();
    const auto phase = doc.at("phase").get<std::string>();
    if (phase != "mixing" && phase != "stationary") throw ConfigError("checkpoint: unknown phase '" + phase + "'");
    st.phase = phase == "mixing" ? Phase::kMixing : Phase::kStationary;
    st.phase_round = doc.at("phase_round").get<long>();
    if (st.episode < 1) throw ConfigError("checkpoint: episode must be >= 1");
    st.schedule = episode_lengths(st.episode, c.alpha, S, A, c.delta, c.zeta);
    st.visits = counts_from_json(doc.at("visits"), S, A, "visits");
    st.transitions = counts_from_json(doc.at("transitions"), S * A, S, "transitions");
    st.episode_visits = counts_from_json(doc.at("episode_visits"), S, A, "episode_visits");
    st.reward_sums = tables_from_json(doc.at("reward_sums"), n + 1, S, A, "reward_sums");
    st.empirical_kernel = table_from_json(doc.at("empirical_kernel"), S * A, S, "empirical_kernel");
    st.band.lower = table_from_json(doc.at("band_lower"), S * A, S, "band_lower");
    st.band.upper = table_from_json(doc.at("band_upper"), S * A, S, "band_upper");
    st.reward_ucb = tables_from_json(doc.at("reward_ucb"), n + 1, S, A, "reward_ucb");
    st.reward_lcb = tables_from_json(doc.at("reward_lcb"), n + 1, S, A, "reward_lcb");
    st.occupancy = OccupancyMeasure(S, A, table_from_json(doc.at("occupancy"), S * A, S, "occupancy"));
    st.policy = Policy(table_from_json(doc.at("policy"), S, A, "policy"));
    st.payments_seller_favorable =
        tables_from_json(doc.at("payments_seller_favorable"), n, S, A, "payments_seller_favorable");
    st.payments_bidder_favorable =
        tables_from_json(doc.at("payments_bidder_favorable"), n, S, A, "payments_bidder_favorable");
    st.band_rows_kept = doc.value("band_rows_kept", 0L);
    st.clipped_reports = doc.value("clipped_reports", 0L);
    return OnlineLearner(c, std::move(st));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace dynvcg
