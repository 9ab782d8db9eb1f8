#include "dynvcg/bidders.hpp"

#include <algorithm>
#include <cmath>

namespace dynvcg {

namespace {

double clip_unit(double x) { return std::isnan(x) ? 0.0 : std::clamp(x, 0.0, 1.0); }

}  // namespace

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kTruthful:
      return "truthful";
    case StrategyKind::kByBids:
      return "by_bids";
    case StrategyKind::kScaled:
      return "scaled";
    case StrategyKind::kShifted:
      return "shifted";
    case StrategyKind::kAdversarialWindow:
      return "adversarial_window";
  }
  return "unknown";
}

BidderStrategy BidderStrategy::truthful() { return {}; }

BidderStrategy BidderStrategy::by_bids(RewardTable bids) {
  BidderStrategy out;
  out.kind_ = StrategyKind::kByBids;
  out.bids_ = std::move(bids);
  return out;
}

BidderStrategy BidderStrategy::scaled(double factor) {
  BidderStrategy out;
  out.kind_ = StrategyKind::kScaled;
  out.factor_ = factor;
  return out;
}

BidderStrategy BidderStrategy::shifted(double offset) {
  BidderStrategy out;
  out.kind_ = StrategyKind::kShifted;
  out.offset_ = offset;
  return out;
}

BidderStrategy BidderStrategy::adversarial(std::vector<AdversarialWindow> windows) {
  BidderStrategy out;
  out.kind_ = StrategyKind::kAdversarialWindow;
  out.windows_ = std::move(windows);
  return out;
}

double BidderStrategy::report(const ReportContext& ctx, Rng& rng) const {
  switch (kind_) {
    case StrategyKind::kTruthful:
      return clip_unit(ctx.realized);
    case StrategyKind::kByBids:
      return clip_unit(bids_(ctx.s, ctx.a));
    case StrategyKind::kScaled:
      return clip_unit(factor_ * ctx.realized);
    case StrategyKind::kShifted:
      return clip_unit(ctx.realized + offset_);
    case StrategyKind::kAdversarialWindow:
      for (const auto& w : windows_) {
        if (ctx.episode < w.first_episode || ctx.episode > w.last_episode) continue;
        if (w.probability < 1.0) {
          std::bernoulli_distribution coin(std::clamp(w.probability, 0.0, 1.0));
          if (!coin(rng)) break;
        }
        return clip_unit(w.factor * ctx.realized + w.offset);
      }
      return clip_unit(ctx.realized);
  }
  return clip_unit(ctx.realized);
}

RewardTable BidderStrategy::offline_bids(const RewardTable& true_means) const {
  switch (kind_) {
    case StrategyKind::kByBids:
      return bids_.unaryExpr(&clip_unit);
    case StrategyKind::kScaled:
      return (factor_ * true_means).unaryExpr(&clip_unit);
    case StrategyKind::kShifted:
      return (true_means.array() + offset_).matrix().unaryExpr(&clip_unit);
    default:
      return true_means.unaryExpr(&clip_unit);
  }
}

nlohmann::json BidderStrategy::to_json() const {
  nlohmann::json out{{"kind", to_string(kind_)}};
  switch (kind_) {
    case StrategyKind::kByBids:
      out["bids"] = table_to_json(bids_);
      break;
    case StrategyKind::kScaled:
      out["factor"] = factor_;
      break;
    case StrategyKind::kShifted:
      out["offset"] = offset_;
      break;
    case StrategyKind::kAdversarialWindow: {
      nlohmann::json ws = nlohmann::json::array();
      for (const auto& w : windows_) {
        ws.push_back({{"first_episode", w.first_episode},
                      {"last_episode", w.last_episode},
                      {"factor", w.factor},
                      {"offset", w.offset},
                      {"probability", w.probability}});
      }
      out["windows"] = std::move(ws);
      break;
    }
    default:
      break;
  }
  return out;
}

BidderStrategy BidderStrategy::from_json(const nlohmann::json& doc, int num_states, int num_actions) {
  try {
    const auto kind = doc.is_string() ? doc.get<std::string>() : doc.at("kind").get<std::string>();
    if (kind == "truthful") return truthful();
    if (kind == "by_bids") {
      RewardTable bids = table_from_json(doc.at("bids"), num_states, num_actions, "by_bids");
      if (bids.minCoeff() < 0.0 || bids.maxCoeff() > 1.0) throw ConfigError("by_bids: entries must lie in [0, 1]");
      return by_bids(std::move(bids));
    }
    if (kind == "scaled") return scaled(doc.at("factor").get<double>());
    if (kind == "shifted") return shifted(doc.at("offset").get<double>());
    if (kind == "adversarial_window") {
      std::vector<AdversarialWindow> windows;
      for (const auto& w : doc.at("windows")) {
        AdversarialWindow win;
        win.first_episode = w.value("first_episode", 1L);
        win.last_episode = w.value("last_episode", win.first_episode);
        win.factor = w.value("factor", 1.0);
        win.offset = w.value("offset", 0.0);
        win.probability = w.value("probability", 1.0);
        if (win.last_episode < win.first_episode) throw ConfigError("adversarial_window: empty episode range");
        if (win.probability < 0.0 || win.probability > 1.0) {
          throw ConfigError("adversarial_window: probability must lie in [0, 1]");
        }
        windows.push_back(win);
      }
      return adversarial(std::move(windows));
    }
    throw ConfigError("unknown bidder strategy '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bidder strategy: ") + e.what());
  }
}

}  // namespace dynvcg
