#ifndef BOPE_METRICS_HPP
#define BOPE_METRICS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bope/loop.hpp"

namespace bope {

/// Regret curve of one record stretched to `length` entries (initialization
/// plus iterations). A run that stopped at the regret floor is padded with
/// the floor; any other short run carries its last value forward.
std::vector<double> padded_regret_curve(const RunRecord& record, std::size_t length);

struct CurvePoint {
  int iteration = 0;  // 0 is the state after initialization
  double mean = 0.0;
  double median = 0.0;
  double se = 0.0;  // sample standard deviation / √n; 0 for a single record
  double errors = 0.0;  // mean cumulative preference errors
};

/// Per-iteration statistics over replications, aligned to the longest
/// record. Throws InputError on an empty input.
std::vector<CurvePoint> aggregate_curves(const std::vector<RunRecord>& records);

/// Mean cumulative preference-error count per iteration, aligned like
/// aggregate_curves. Throws InputError for records without ground truth.
std::vector<double> error_curve(const std::vector<RunRecord>& records);

/// iteration,regret_mean,regret_median,regret_se,errors
std::string curve_csv(const std::vector<CurvePoint>& curve);

double median(std::vector<double> values);

/// Two-sided exact sign-test p-value for `wins` against `losses` (ties dropped).
double sign_test_p_value(int wins, int losses);

struct ConditionSummary {
  std::string name;
  double median_final_regret = 0.0;
  int rank = 0;  // 1 is best; equal medians share a rank
};

struct PairedComparison {
  std::string first;
  std::string second;
  int first_wins = 0;  // seeds where first has the lower final regret
  int second_wins = 0;
  int ties = 0;
  double median_difference = 0.0;  // median over seeds of (second − first)
  double p_value = 1.0;
};

struct ConditionTable {
  std::vector<ConditionSummary> conditions;
  std::vector<PairedComparison> comparisons;  // every unordered pair of conditions
};

/// Final regrets keyed by condition then seed. Needs at least two conditions
/// sharing one seed set; throws InputError otherwise.
ConditionTable compare_conditions(const std::map<std::string, std::map<std::uint64_t, double>>& final_regrets);

std::string condition_table_csv(const ConditionTable& table);

}  // namespace bope

#endif  // BOPE_METRICS_HPP
