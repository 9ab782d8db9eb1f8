// Command-line front end: simulate, offline-vcg, calibrate-delta, generate-model.
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "dynvcg/export.hpp"
#include "dynvcg/harness.hpp"
#include "dynvcg/offline_vcg.hpp"
#include "dynvcg/polytope.hpp"

namespace {

using namespace dynvcg;

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

BidProfile load_bids(const std::string& path, const MdpModel& model) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bids file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bids '" + path + "': " + e.what());
  }
  const auto& tables = doc.is_object() ? doc.at("bids") : doc;
  if (!tables.is_array() || static_cast<int>(tables.size()) != model.num_bidders) {
    throw ConfigError("bids: expected one S x A table per bidder");
  }
  BidProfile out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    auto t = table_from_json(tables[i], model.num_states, model.num_actions, "bids[" + std::to_string(i) + "]");
    if (t.minCoeff() < 0.0 || t.maxCoeff() > 1.0) throw ConfigError("bids: entries must lie in [0, 1]");
    out.bids.push_back(std::move(t));
  }
  return out;
}

nlohmann::json tables_json(const std::vector<RewardTable>& tables) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : tables) out.push_back(table_to_json(t));
  return out;
}

void emit(const nlohmann::json& doc, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_json(out, doc);
  }
}

int cmd_simulate(const std::string& config_path, std::optional<int> seeds, const std::vector<std::uint64_t>& seed_list,
                 std::optional<long> horizon, const std::string& out_dir, const std::string& format) {
  ExperimentConfig config = load_experiment(config_path);
  if (!seed_list.empty()) {
    config.seeds = seed_list;
  } else if (seeds) {
    if (*seeds < 1) throw ConfigError("--seeds must be positive");
    config.seeds = default_seeds(*seeds);
  }
  if (horizon) {
    if (*horizon < 1) throw ConfigError("--horizon must be >= 1");
    config.horizon = *horizon;
  }
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (!format.empty()) config.format = format;

  const auto result = run_experiment(config, true);
  const auto& last = result.mean_regrets.empty() ? RegretPoint{} : result.mean_regrets.back();
  spdlog::info("config {}: {} seeds, mean Reg_SW({}) = {:.6g}, Reg_SELL = {:.6g}, Reg_BID = {:.6g}",
               result.config_hash, result.runs.size(), last.t, last.welfare, last.seller, last.bidders);
  std::cout << config.output_dir << "\n";
  return 0;
}

int cmd_offline(const std::string& model_path, const std::string& bids_path, const std::string& out, long trajectory,
                std::uint64_t seed) {
  const MdpModel model = load_model(model_path);
  std::optional<BidProfile> bids;
  if (!bids_path.empty()) bids = load_bids(bids_path, model);
  const OfflineReport report = run_offline(model, bids, trajectory, seed);

  nlohmann::json doc;
  doc["policy"] = table_to_json(report.mechanism.allocation.matrix());
  doc["payments"] = tables_json(report.mechanism.payments);
  doc["counterfactual_values"] = report.mechanism.counterfactual_values;
  doc["reported_welfare"] = report.mechanism.reported_welfare;
  doc["utilities"] = {{"seller", report.exact.seller}, {"bidders", report.exact.bidders}};
  doc["welfare"] = report.exact.welfare;
  doc["identity_residual"] = report.identity.residual();
  if (report.trajectory_length > 0) {
    doc["empirical"] = {{"rounds", report.trajectory_length},
                        {"seed", seed},
                        {"welfare", report.empirical.welfare},
                        {"seller", report.empirical.seller},
                        {"bidders", report.empirical.bidders},
                        {"payments", report.empirical_payments}};
  }
  emit(doc, out);
  return 0;
}

int cmd_calibrate(const std::string& model_path, double epsilon, const std::string& out) {
  if (!(epsilon > 0.0)) throw ConfigError("--epsilon must be positive");
  const MdpModel model = load_model(model_path);
  const auto cal = calibrate_delta(model.kernel, model.total_rewards(), epsilon);
  emit({{"delta", cal.delta},
        {"gap_met", cal.gap_met},
        {"full_value", cal.full_value},
        {"shrunk_value", cal.shrunk_value},
        {"epsilon", epsilon}},
       out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic VCG mechanisms for average-reward MDPs"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  auto* sim = app.add_subcommand("simulate", "Run the online learner over seeded simulations");
  std::string config_path, out_dir, format;
  std::optional<int> seeds;
  std::vector<std::uint64_t> seed_list;
  std::optional<long> horizon;
  sim->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seeds_opt = sim->add_option("--seeds", seeds, "Use seeds 1..n");
  sim->add_option("--seed-list", seed_list, "Explicit seeds")->delimiter(',')->excludes(seeds_opt);
  sim->add_option("--horizon", horizon, "Rounds T (overrides the config)");
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* off = app.add_subcommand("offline-vcg", "Offline mechanism for a known model");
  std::string model_path, bids_path, out_file;
  long trajectory = 0;
  std::uint64_t seed = 1;
  off->add_option("--model", model_path, "Model file (JSON)")->required()->check(CLI::ExistingFile);
  off->add_option("--bids", bids_path, "Bid tables (JSON); truthful when omitted")->check(CLI::ExistingFile);
  off->add_option("--out", out_file, "Output JSON ('-' for stdout)");
  off->add_option("--trajectory", trajectory, "Also simulate this many rounds under (pi*, p*)");
  off->add_option("--seed", seed, "Seed for the simulated trajectory");

  auto* cal = app.add_subcommand("calibrate-delta", "Largest grid delta within epsilon of the unshrunk optimum");
  double epsilon = 0.1;
  std::string cal_model, cal_out;
  cal->add_option("--model", cal_model, "Model file (JSON)")->required()->check(CLI::ExistingFile);
  cal->add_option("--epsilon", epsilon, "Allowed welfare loss")->required();
  cal->add_option("--out", cal_out, "Output JSON ('-' for stdout)");

  auto* gen = app.add_subcommand("generate-model", "Write a random model satisfying the transition floor");
  GeneratorConfig gcfg;
  std::string type = "generic", family = "deterministic", gen_out;
  std::uint64_t gen_seed = 1;
  gen->add_option("--type", type, "generic, single-item, multi-unit, combinatorial");
  gen->add_option("--states", gcfg.num_states, "S");
  gen->add_option("--actions", gcfg.num_actions, "A (generic only)");
  gen->add_option("--bidders", gcfg.num_bidders, "n");
  gen->add_option("--items", gcfg.num_items, "Items (multi-unit, combinatorial)");
  gen->add_option("--alpha", gcfg.alpha, "Transition floor");
  gen->add_option("--c-max", gcfg.c_max, "Seller reward cap");
  gen->add_option("--family", family, "deterministic or bernoulli-scaled");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  // Logs go to stderr so that JSON written to stdout stays parseable.
  spdlog::set_default_logger(spdlog::stderr_color_mt("dynvcg"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*sim) return cmd_simulate(config_path, seeds, seed_list, horizon, out_dir, format);
    if (*off) return cmd_offline(model_path, bids_path, out_file, trajectory, seed);
    if (*cal) return cmd_calibrate(cal_model, epsilon, cal_out);
    if (*gen) {
      gcfg.type = auction_type_from_string(type);
      gcfg.family = reward_family_from_string(family);
      save_model(generate_model(gcfg, gen_seed), gen_out);
      std::cout << gen_out << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
