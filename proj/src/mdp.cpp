#include "dynvcg/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dynvcg {

TransitionKernel::TransitionKernel(int num_states, int num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      rows_(Eigen::MatrixXd::Zero(num_states * num_actions, num_states)) {}

TransitionKernel::TransitionKernel(int num_states, int num_actions, Eigen::MatrixXd rows)
    : num_states_(num_states), num_actions_(num_actions), rows_(std::move(rows)) {
  if (rows_.rows() != num_states * num_actions || rows_.cols() != num_states) {
    throw std::invalid_argument("TransitionKernel: matrix must be (S*A) x S");
  }
}

TransitionKernel TransitionKernel::uniform(int num_states, int num_actions) {
  return TransitionKernel(
      num_states, num_actions,
      Eigen::MatrixXd::Constant(num_states * num_actions, num_states, 1.0 / num_states));
}

std::string to_string(RewardFamily family) {
  switch (family) {
    case RewardFamily::kDeterministic:
      return "deterministic";
    case RewardFamily::kBernoulliScaled:
      return "bernoulli-scaled";
  }
  return "unknown";
}

RewardFamily reward_family_from_string(const std::string& name) {
  if (name == "deterministic") return RewardFamily::kDeterministic;
  if (name == "bernoulli-scaled") return RewardFamily::kBernoulliScaled;
  throw ConfigError("unknown reward family '" + name + "'");
}

std::string to_string(AuctionType type) {
  switch (type) {
    case AuctionType::kGeneric:
      return "generic";
    case AuctionType::kSingleItem:
      return "single-item";
    case AuctionType::kMultiUnit:
      return "multi-unit";
    case AuctionType::kCombinatorial:
      return "combinatorial";
  }
  return "unknown";
}

AuctionType auction_type_from_string(const std::string& name) {
  if (name == "generic") return AuctionType::kGeneric;
  if (name == "single-item") return AuctionType::kSingleItem;
  if (name == "multi-unit") return AuctionType::kMultiUnit;
  if (name == "combinatorial") return AuctionType::kCombinatorial;
  throw ConfigError("unknown auction type '" + name + "'");
}

std::vector<RewardTable> MdpModel::bidder_rewards() const {
  return {reward_means.begin() + 1, reward_means.end()};
}

RewardTable MdpModel::total_rewards() const {
  RewardTable total = RewardTable::Zero(num_states, num_actions);
  for (const auto& r : reward_means) total += r;
  return total;
}

std::string Violation::describe() const {
  std::ostringstream out;
  out << invariant;
  if (player >= 0) out << " player=" << player;
  if (s >= 0) out << " s=" << s;
  if (a >= 0) out << " a=" << a;
  if (next >= 0) out << " s'=" << next;
  out << " value=" << value;
  return out.str();
}

std::vector<Violation> validate_model(const MdpModel& model) {
  std::vector<Violation> out;
  const int S = model.num_states;
  const int A = model.num_actions;
  if (S < 1) out.push_back({"S >= 1", -1, -1, -1, -1, static_cast<double>(S)});
  if (A < 1) out.push_back({"A >= 1", -1, -1, -1, -1, static_cast<double>(A)});
  if (model.num_bidders < 0) {
    out.push_back({"n >= 0", -1, -1, -1, -1, static_cast<double>(model.num_bidders)});
  }
  if (!(model.alpha > 0.0)) out.push_back({"alpha > 0", -1, -1, -1, -1, model.alpha});
  if (model.alpha * S > 1.0 + 1e-12) {
    out.push_back({"alpha * S <= 1", -1, -1, -1, -1, model.alpha * S});
  }
  if (model.c_max < 0.0) out.push_back({"c_max >= 0", -1, -1, -1, -1, model.c_max});
  if (!out.empty() && (S < 1 || A < 1)) return out;

  const auto& P = model.kernel;
  if (P.num_states() != S || P.num_actions() != A) {
    out.push_back({"kernel dims match (S, A)", -1, -1, -1, -1, 0.0});
    return out;
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double total = P.row(s, a).sum();
      if (std::abs(total - 1.0) > Tolerances::kKernelRowSum) {
        out.push_back({"kernel row sums to 1", s, a, -1, -1, total});
      }
      for (int next = 0; next < S; ++next) {
        const double p = P(s, a, next);
        if (!(p >= model.alpha)) out.push_back({"P(s'|s,a) >= alpha", s, a, next, -1, p});
      }
    }
  }

  const int players = model.num_bidders + 1;
  if (static_cast<int>(model.reward_means.size()) != players) {
    out.push_back({"reward table per player", -1, -1, -1, -1,
                   static_cast<double>(model.reward_means.size())});
    return out;
  }
  if (static_cast<int>(model.reward_families.size()) != players) {
    out.push_back({"reward family per player", -1, -1, -1, -1,
                   static_cast<double>(model.reward_families.size())});
  }
  for (int i = 0; i < players; ++i) {
    const auto& r = model.reward_means[i];
    if (r.rows() != S || r.cols() != A) {
      out.push_back({"reward table dims match (S, A)", -1, -1, -1, i, 0.0});
      continue;
    }
    const double cap = model.reward_cap(i);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double v = r(s, a);
        if (!(v >= 0.0 && v <= cap)) {
          out.push_back({i == 0 ? "0 <= r_0 <= c_max" : "0 <= r_i <= 1", s, a, -1, i, v});
        }
      }
    }
  }
  return out;
}

namespace {

void enumerate_multi_unit(int bidder, int remaining, std::vector<int>& current,
                          std::vector<std::vector<int>>& out) {
  if (bidder == static_cast<int>(current.size())) {
    out.push_back(current);
    return;
  }
  for (int units = 0; units <= remaining; ++units) {
    current[bidder] = units;
    enumerate_multi_unit(bidder + 1, remaining - units, current, out);
  }
  current[bidder] = 0;
}

bool bidder_receives(const GeneratorConfig& config, const std::vector<int>& action, int bidder) {
  switch (config.type) {
    case AuctionType::kSingleItem:
    case AuctionType::kMultiUnit:
      return action[bidder - 1] > 0;
    case AuctionType::kCombinatorial:
      return std::find(action.begin(), action.end(), bidder) != action.end();
    case AuctionType::kGeneric:
      return true;
  }
  return true;
}

std::string label_of(const GeneratorConfig& config, const std::vector<int>& action) {
  if (config.type == AuctionType::kSingleItem) {
    for (int i = 0; i < static_cast<int>(action.size()); ++i) {
      if (action[i] > 0) return "e" + std::to_string(i + 1);
    }
    return "0";
  }
  std::string label = "(";
  for (std::size_t j = 0; j < action.size(); ++j) {
    if (j > 0) label += ",";
    label += std::to_string(action[j]);
  }
  return label + ")";
}

}  // namespace

std::vector<std::vector<int>> auction_actions(const GeneratorConfig& config) {
  std::vector<std::vector<int>> out;
  const int n = config.num_bidders;
  switch (config.type) {
    case AuctionType::kGeneric:
      for (int a = 0; a < config.num_actions; ++a) out.push_back({a});
      break;
    case AuctionType::kSingleItem:
      out.emplace_back(n, 0);
      for (int i = 0; i < n; ++i) {
        std::vector<int> e(n, 0);
        e[i] = 1;
        out.push_back(e);
      }
      break;
    case AuctionType::kMultiUnit: {
      std::vector<int> current(n, 0);
      enumerate_multi_unit(0, config.num_items, current, out);
      break;
    }
    case AuctionType::kCombinatorial: {
      const int m = config.num_items;
      long total = 1;
      for (int j = 0; j < m; ++j) total *= (n + 1);
      for (long code = 0; code < total; ++code) {
        std::vector<int> action(m);
        long rest = code;
        for (int j = 0; j < m; ++j) {
          action[j] = static_cast<int>(rest % (n + 1));
          rest /= (n + 1);
        }
        out.push_back(action);
      }
      break;
    }
  }
  return out;
}

MdpModel generate_model(const GeneratorConfig& config, std::uint64_t seed) {
  if (config.num_states < 1) throw ConfigError("generator: S must be >= 1");
  if (config.num_bidders < 0) throw ConfigError("generator: n must be >= 0");
  if (config.type == AuctionType::kGeneric && config.num_actions < 1) {
    throw ConfigError("generator: A must be >= 1");
  }
  if (config.type != AuctionType::kGeneric && config.num_bidders < 1) {
    throw ConfigError("generator: auction types need at least one bidder");
  }
  if ((config.type == AuctionType::kMultiUnit || config.type == AuctionType::kCombinatorial) &&
      config.num_items < 1) {
    throw ConfigError("generator: auction needs at least one item");
  }
  if (!(config.alpha > 0.0) || config.alpha * config.num_states > 1.0 + 1e-12) {
    throw ConfigError("generator: need 0 < alpha and alpha * S <= 1");
  }
  if (config.c_max < 0.0) throw ConfigError("generator: c_max must be >= 0");

  const auto actions = auction_actions(config);
  const int S = config.num_states;
  const int A = static_cast<int>(actions.size());
  const int n = config.num_bidders;

  Rng rng = make_stream(seed, 0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  MdpModel model;
  model.num_states = S;
  model.num_actions = A;
  model.num_bidders = n;
  model.alpha = config.alpha;
  model.c_max = config.c_max;
  model.auction = config.type;

  // Dirichlet(1) rows mixed with the uniform matrix.
  const double mix = std::max(0.0, 1.0 - S * config.alpha);
  Eigen::MatrixXd rows(S * A, S);
  for (int r = 0; r < S * A; ++r) {
    Eigen::RowVectorXd q(S);
    for (int j = 0; j < S; ++j) q(j) = expo(rng);
    q /= q.sum();
    for (int j = 0; j < S; ++j) rows(r, j) = mix * q(j) + config.alpha;
  }
  model.kernel = TransitionKernel(S, A, std::move(rows));

  model.reward_means.assign(n + 1, RewardTable::Zero(S, A));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) model.reward_means[0](s, a) = config.c_max * unif(rng);
  }
  for (int i = 1; i <= n; ++i) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double draw = unif(rng);
        model.reward_means[i](s, a) = bidder_receives(config, actions[a], i) ? draw : 0.0;
      }
    }
  }
  model.reward_families.assign(n + 1, config.family);
  if (config.type != AuctionType::kGeneric) {
    for (const auto& action : actions) model.action_labels.push_back(label_of(config, action));
  }
  return model;
}

double sample_reward(const MdpModel& model, int player, int s, int a, Rng& rng) {
  const double mean = model.reward_means[player](s, a);
  const double cap = model.reward_cap(player);
  double value = mean;
  if (model.reward_families[player] == RewardFamily::kBernoulliScaled) {
    if (cap <= 0.0) return 0.0;
    std::bernoulli_distribution coin(std::clamp(mean / cap, 0.0, 1.0));
    value = coin(rng) ? cap : 0.0;
  }
  return std::clamp(value, 0.0, cap);
}

StepOutcome step(const MdpModel& model, SimState& sim, int action) {
  if (action < 0 || action >= model.num_actions) {
    throw std::out_of_range("step: action out of range");
  }
  StepOutcome out;
  out.rewards.resize(model.num_bidders + 1);
  for (int i = 0; i <= model.num_bidders; ++i) {
    out.rewards[i] = sample_reward(model, i, sim.state, action, sim.rng);
  }
  out.next_state = sample_index(model.kernel.row(sim.state, action), sim.rng);
  sim.state = out.next_state;
  ++sim.t;
  return out;
}

nlohmann::json table_to_json(const Eigen::MatrixXd& table) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < table.cols(); ++c) row.push_back(table(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd table_from_json(const nlohmann::json& doc, int rows, int cols,
                                const std::string& what) {
  if (!doc.is_array() || static_cast<int>(doc.size()) != rows) {
    throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = doc[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ConfigError(what + ": expected " + std::to_string(cols) + " columns in row " +
                        std::to_string(r));
    }
    for (int c = 0; c < cols; ++c) out(r, c) = row[c].get<double>();
  }
  return out;
}

nlohmann::json model_to_json(const MdpModel& model) {
  const int S = model.num_states;
  const int A = model.num_actions;
  nlohmann::json kernel = nlohmann::json::array();
  for (int s = 0; s < S; ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    for (int a = 0; a < A; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (int next = 0; next < S; ++next) row.push_back(model.kernel(s, a, next));
      per_action.push_back(std::move(row));
    }
    kernel.push_back(std::move(per_action));
  }
  nlohmann::json rewards = nlohmann::json::array();
  for (const auto& r : model.reward_means) rewards.push_back(table_to_json(r));
  nlohmann::json families = nlohmann::json::array();
  for (auto f : model.reward_families) families.push_back(to_string(f));

  nlohmann::json doc = {{"S", S},
                        {"A", A},
                        {"n", model.num_bidders},
                        {"alpha", model.alpha},
                        {"c_max", model.c_max},
                        {"kernel", std::move(kernel)},
                        {"reward_means", std::move(rewards)},
                        {"reward_family", std::move(families)}};
  if (model.auction != AuctionType::kGeneric || !model.action_labels.empty()) {
    doc["metadata"] = {{"auction", to_string(model.auction)}, {"action_labels", model.action_labels}};
  }
  return doc;
}

MdpModel model_from_json(const nlohmann::json& doc) {
  try {
    MdpModel model;
    model.num_states = doc.at("S").get<int>();
    model.num_actions = doc.at("A").get<int>();
    model.num_bidders = doc.at("n").get<int>();
    model.alpha = doc.at("alpha").get<double>();
    model.c_max = doc.value("c_max", 1.0);
    const int S = model.num_states;
    const int A = model.num_actions;
    if (S < 1 || A < 1 || model.num_bidders < 0) throw ConfigError("model: bad dimensions");

    const auto& kernel = doc.at("kernel");
    if (!kernel.is_array() || static_cast<int>(kernel.size()) != S) {
      throw ConfigError("model: kernel must be [S][A][S]");
    }
    Eigen::MatrixXd rows(S * A, S);
    for (int s = 0; s < S; ++s) {
      const Eigen::MatrixXd block = table_from_json(kernel[s], A, S, "model.kernel[s]");
      rows.middleRows(s * A, A) = block;
    }
    model.kernel = TransitionKernel(S, A, std::move(rows));

    const auto& rewards = doc.at("reward_means");
    if (!rewards.is_array() || static_cast<int>(rewards.size()) != model.num_bidders + 1) {
      throw ConfigError("model: reward_means must have n + 1 tables");
    }
    for (const auto& table : rewards) {
      model.reward_means.push_back(table_from_json(table, S, A, "model.reward_means"));
    }

    const auto& family = doc.at("reward_family");
    if (family.is_string()) {
      model.reward_families.assign(model.num_bidders + 1,
                                   reward_family_from_string(family.get<std::string>()));
    } else {
      if (!family.is_array() || static_cast<int>(family.size()) != model.num_bidders + 1) {
        throw ConfigError("model: reward_family must be a string or n + 1 strings");
      }
      for (const auto& f : family) {
        model.reward_families.push_back(reward_family_from_string(f.get<std::string>()));
      }
    }
    if (doc.contains("metadata")) {
      const auto& meta = doc["metadata"];
      model.auction = auction_type_from_string(meta.value("auction", std::string("generic")));
      model.action_labels = meta.value("action_labels", std::vector<std::string>{});
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

MdpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path + ": " + e.what());
  }
  return model_from_json(doc);
}

void save_model(const MdpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  out << model_to_json(model).dump(2) << '\n';
}

GeneratorConfig generator_from_json(const nlohmann::json& doc) {
  GeneratorConfig c;
  try {
    c.type = auction_type_from_string(doc.value("type", to_string(c.type)));
    c.num_states = doc.value("S", c.num_states);
    c.num_actions = doc.value("A", c.num_actions);
    c.num_bidders = doc.value("n", c.num_bidders);
    c.num_items = doc.value("items", c.num_items);
    c.alpha = doc.value("alpha", c.alpha);
    c.c_max = doc.value("c_max", c.c_max);
    c.family = reward_family_from_string(doc.value("family", to_string(c.family)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
  return c;
}

nlohmann::json generator_to_json(const GeneratorConfig& c) {
  return {{"type", to_string(c.type)}, {"S", c.num_states},   {"A", c.num_actions},
          {"n", c.num_bidders},        {"items", c.num_items}, {"alpha", c.alpha},
          {"c_max", c.c_max},          {"family", to_string(c.family)}};
}

}  // namespace dynvcg
