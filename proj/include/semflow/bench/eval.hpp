#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "semflow/common/errors.hpp"
#include "semflow/event.hpp"

namespace semflow::bench {

/// Clusters of item ids.
using Partition = std::vector<std::vector<std::string>>;

struct ClusteringScores {
  double pairwise_precision = 0;
  double pairwise_recall = 0;
  double pairwise_f1 = 0;
  double ari = 0;
  double purity = 0;
};

inline void to_json(nlohmann::json& j, const ClusteringScores& s) {
  j = nlohmann::json{{"pairwise_precision", s.pairwise_precision},
                     {"pairwise_recall", s.pairwise_recall},
                     {"pairwise_f1", s.pairwise_f1},
                     {"ari", s.ari},
                     {"purity", s.purity}};
}

inline Partition partition_from_labels(const std::map<std::string, std::string>& item_to_label) {
  std::map<std::string, std::vector<std::string>> by;
  for (const auto& [item, label] : item_to_label) by[label].push_back(item);
  Partition p;
  for (auto& [_, items] : by) p.push_back(std::move(items));
  return p;
}

namespace eval_detail {

inline std::map<std::string, std::size_t> labels(const Partition& p, const char* side) {
  std::map<std::string, std::size_t> out;
  for (std::size_t c = 0; c < p.size(); ++c)
    for (const auto& item : p[c])
      if (!out.emplace(item, c).second)
        throw UniverseMismatch(std::string(side) + " partition lists '" + item + "' more than once");
  return out;
}

inline double comb2(double n) { return n * (n - 1) / 2; }

}  // namespace eval_detail

/// Pairwise co-clustering precision/recall/F1, adjusted Rand index
/// (contingency-table form) and purity.
///
/// Conventions: F1 is 0 when exactly one side has no co-clustered pairs
/// and 1 when neither has; ARI is 1 when its denominator vanishes (both
/// partitions all-singletons or both a single cluster); an empty universe
/// scores 1 everywhere.
inline ClusteringScores eval_clustering(const Partition& pred, const Partition& truth) {
  const auto lp = eval_detail::labels(pred, "predicted");
  const auto lt = eval_detail::labels(truth, "truth");
  if (lp.size() != lt.size()) throw UniverseMismatch("partitions cover different item sets");
  for (const auto& [item, _] : lp)
    if (!lt.count(item)) throw UniverseMismatch("item '" + item + "' missing from the truth partition");

  ClusteringScores s;
  const double n = static_cast<double>(lp.size());
  if (lp.empty()) {
    s.pairwise_precision = s.pairwise_recall = s.pairwise_f1 = s.ari = s.purity = 1.0;
    return s;
  }
  std::map<std::pair<std::size_t, std::size_t>, double> cell;
  std::map<std::size_t, double> rows, cols;
  for (const auto& [item, c] : lp) {
    const auto k = lt.at(item);
    cell[{c, k}] += 1;
    rows[c] += 1;
    cols[k] += 1;
  }
  double both = 0, pred_pairs = 0, truth_pairs = 0;
  for (const auto& [_, v] : cell) both += eval_detail::comb2(v);
  for (const auto& [_, v] : rows) pred_pairs += eval_detail::comb2(v);
  for (const auto& [_, v] : cols) truth_pairs += eval_detail::comb2(v);

  if (pred_pairs == 0 && truth_pairs == 0) {
    s.pairwise_precision = s.pairwise_recall = s.pairwise_f1 = 1.0;
  } else {
    s.pairwise_precision = pred_pairs > 0 ? both / pred_pairs : 0.0;
    s.pairwise_recall = truth_pairs > 0 ? both / truth_pairs : 0.0;
    const double d = s.pairwise_precision + s.pairwise_recall;
    s.pairwise_f1 = d > 0 ? 2 * s.pairwise_precision * s.pairwise_recall / d : 0.0;
  }

  const double total = eval_detail::comb2(n);
  const double expected = total > 0 ? pred_pairs * truth_pairs / total : 0.0;
  const double maximum = (pred_pairs + truth_pairs) / 2;
  s.ari = maximum - expected == 0 ? 1.0 : (both - expected) / (maximum - expected);

  std::map<std::size_t, double> best;
  for (const auto& [ck, v] : cell) best[ck.first] = std::max(best[ck.first], v);
  double hit = 0;
  for (const auto& [_, v] : best) hit += v;
  s.purity = hit / n;
  return s;
}

/// Match identity for evaluation: (entity, pattern, event timestamps).
struct PatternKey {
  std::string entity_id;
  std::string pattern_id;
  std::vector<Timestamp> timestamps;

  auto operator<=>(const PatternKey&) const = default;
};

inline PatternKey key_of(const PatternMatch& m) {
  PatternKey k{m.entity_id, m.pattern_id, {}};
  for (const auto& e : m.events) k.timestamps.push_back(e.timestamp);
  return k;
}

inline void to_json(nlohmann::json& j, const PatternKey& k) {
  j = nlohmann::json{{"entity_id", k.entity_id}, {"pattern_id", k.pattern_id}, {"timestamps", k.timestamps}};
}

inline void from_json(const nlohmann::json& j, PatternKey& k) {
  k.entity_id = j.at("entity_id").get<std::string>();
  k.pattern_id = j.at("pattern_id").get<std::string>();
  k.timestamps = j.at("timestamps").get<std::vector<Timestamp>>();
}

struct PatternScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t expected = 0;
};

inline void to_json(nlohmann::json& j, const PatternScores& s) {
  j = nlohmann::json{{"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1},
                     {"true_positives", s.true_positives}, {"predicted", s.predicted}, {"expected", s.expected}};
}

/// Exact-key precision/recall/F1. Both sets empty scores 1.
inline PatternScores eval_pattern(const std::set<PatternKey>& pred, const std::set<PatternKey>& truth) {
  PatternScores s;
  s.predicted = pred.size();
  s.expected = truth.size();
  for (const auto& k : pred) s.true_positives += truth.count(k);
  if (pred.empty() && truth.empty()) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  const double tp = static_cast<double>(s.true_positives);
  s.precision = pred.empty() ? 0.0 : tp / static_cast<double>(pred.size());
  s.recall = truth.empty() ? 0.0 : tp / static_cast<double>(truth.size());
  const double d = s.precision + s.recall;
  s.f1 = d > 0 ? 2 * s.precision * s.recall / d : 0.0;
  return s;
}

}  // namespace semflow::bench
