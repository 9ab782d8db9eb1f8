#include "dynvcg/export.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace dynvcg {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{}", x);
}

std::vector<std::string> round_columns(int n) {
  std::vector<std::string> cols{"t", "k", "phase", "s", "a"};
  for (int i = 0; i <= n; ++i) cols.push_back("r_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) cols.push_back("b_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) cols.push_back("p_" + std::to_string(i));
  cols.push_back("u_0");
  for (int i = 1; i <= n; ++i) cols.push_back("u_" + std::to_string(i));
  cols.push_back("R");
  return cols;
}

namespace {

std::ofstream open_or_throw(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

void check_stream(const std::ofstream& out, const std::string& path) {
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

RoundWriter::RoundWriter(const std::string& path, int num_bidders, const std::string& format)
    : path_(path), out_(open_or_throw(path)), num_bidders_(num_bidders), json_(format == "json") {
  if (json_) {
    out_ << "[";
  } else {
    const auto cols = round_columns(num_bidders_);
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }
  check_stream(out_, path_);
}

RoundWriter::~RoundWriter() {
  try {
    close();
  } catch (...) {
  }
}

void RoundWriter::write(const RoundRecord& r) {
  std::vector<std::string> values{std::to_string(r.t), std::to_string(r.episode), to_string(r.phase),
                                  std::to_string(r.s), std::to_string(r.a)};
  for (double x : r.rewards) values.push_back(format_number(x));
  for (double x : r.reports) values.push_back(format_number(x));
  for (double x : r.payments) values.push_back(format_number(x));
  values.push_back(format_number(r.seller_utility));
  for (double x : r.bidder_utilities) values.push_back(format_number(x));
  values.push_back(format_number(r.welfare));

  if (json_) {
    const auto cols = round_columns(num_bidders_);
    out_ << (first_ ? "\n" : ",\n") << "{";
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const bool quoted = cols[i] == "phase";
      out_ << (i ? "," : "") << '"' << cols[i] << "\":" << (quoted ? "\"" : "") << values[i] << (quoted ? "\"" : "");
    }
    out_ << "}";
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << "\n";
  }
  first_ = false;
}

void RoundWriter::close() {
  if (closed_) return;
  closed_ = true;
  if (json_) out_ << (first_ ? "]\n" : "\n]\n");
  out_.flush();
  check_stream(out_, path_);
  out_.close();
}

void write_regret_csv(const std::string& path, const std::vector<RunResult>& runs,
                      const std::vector<RegretPoint>& mean) {
  std::ofstream out = open_or_throw(path);
  out << "seed,t,reg_sw,reg_sell,reg_bid,reg_sw_per_t,reg_sell_per_t,reg_bid_per_t\n";
  auto row = [&out](const std::string& seed, const RegretPoint& p) {
    const double t = static_cast<double>(p.t);
    out << seed << ',' << p.t << ',' << format_number(p.welfare) << ',' << format_number(p.seller) << ','
        << format_number(p.bidders) << ',' << format_number(p.welfare / t) << ',' << format_number(p.seller / t)
        << ',' << format_number(p.bidders / t) << '\n';
  };
  for (const auto& r : runs) {
    for (const auto& p : r.regrets) row(std::to_string(r.seed), p);
  }
  for (const auto& p : mean) row("mean", p);
  check_stream(out, path);
}

nlohmann::json regret_to_json(const RegretPoint& p) {
  const double t = static_cast<double>(p.t);
  return {{"t", p.t},
          {"reg_sw", p.welfare},
          {"reg_sell", p.seller},
          {"reg_bid", p.bidders},
          {"reg_sw_per_t", p.t > 0 ? p.welfare / t : 0.0},
          {"reg_sell_per_t", p.t > 0 ? p.seller / t : 0.0},
          {"reg_bid_per_t", p.t > 0 ? p.bidders / t : 0.0}};
}

nlohmann::json summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
  nlohmann::json doc;
  doc["config_hash"] = result.config_hash;
  doc["seeds"] = config.seeds;
  doc["learner"] = learner_config_to_json(config.learner);
  doc["delta_calibrated"] = config.calibrated_delta;
  doc["benchmark"] = {{"welfare", result.benchmark.utilities.welfare},
                      {"seller_utility", result.benchmark.utilities.seller},
                      {"bidder_utilities", result.benchmark.utilities.bidders},
                      {"bidder_utility_total", result.benchmark.bidders_total()}};

  nlohmann::json finals = nlohmann::json::array();
  for (const auto& r : result.runs) {
    RegretPoint last;
    if (!r.regrets.empty()) last = r.regrets.back();
    auto entry = regret_to_json(last);
    entry["seed"] = r.seed;
    entry["rounds"] = r.rounds;
    entry["episodes_completed"] = std::count_if(r.episodes.begin(), r.episodes.end(),
                                                [](const EpisodeDiagnostics& d) { return d.complete; });
    finals.push_back(std::move(entry));
  }
  doc["final_regrets"] = std::move(finals);
  doc["mean_final_regret"] = regret_to_json(result.mean_regrets.empty() ? RegretPoint{} : result.mean_regrets.back());
  const double slope = loglog_slope(result.mean_regrets);
  doc["loglog_slope_reg_sw"] = std::isnan(slope) ? nlohmann::json(nullptr) : nlohmann::json(slope);

  nlohmann::json schedule = nlohmann::json::array();
  if (!result.runs.empty()) {
    for (const auto& d : result.runs.front().episodes) {
      schedule.push_back({{"k", d.episode},
                          {"start", d.start},
                          {"mixing", d.schedule.mixing},
                          {"stationary", d.schedule.stationary},
                          {"complete", d.complete}});
    }
  }
  doc["episode_schedule"] = std::move(schedule);
  return doc;
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out = open_or_throw(path);
  out << doc.dump(2) << "\n";
  check_stream(out, path);
}

}  // namespace dynvcg
