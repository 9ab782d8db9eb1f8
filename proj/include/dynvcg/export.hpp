#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "dynvcg/harness.hpp"
#include "json.hpp"

namespace dynvcg {

/// Shortest round-trip decimal form, so re-exports are byte-identical.
std::string format_number(double x);

/// Column names of the per-round file.
std::vector<std::string> round_columns(int num_bidders);

/// Streams RoundRecords to CSV (header first) or to a JSON array of objects.
class RoundWriter {
 public:
  RoundWriter(const std::string& path, int num_bidders, const std::string& format);
  ~RoundWriter();
  RoundWriter(const RoundWriter&) = delete;
  RoundWriter& operator=(const RoundWriter&) = delete;

  void write(const RoundRecord& record);
  void close();

 private:
  std::string path_;
  std::ofstream out_;
  int num_bidders_;
  bool json_;
  bool first_ = true;
  bool closed_ = false;
};

/// Long format: seed, t, reg_sw, reg_sell, reg_bid, reg_sw_per_t, reg_sell_per_t,
/// reg_bid_per_t; seed-averaged rows carry seed = "mean".
void write_regret_csv(const std::string& path, const std::vector<RunResult>& runs,
                      const std::vector<RegretPoint>& mean);

nlohmann::json regret_to_json(const RegretPoint& point);

nlohmann::json summary_json(const ExperimentConfig& config, const ExperimentResult& result);
void write_json(const std::string& path, const nlohmann::json& doc);

}  // namespace dynvcg
