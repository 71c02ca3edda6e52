#include "bope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bope/errors.hpp"

namespace bope {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t longest(const std::vector<RunRecord>& records) {
  std::size_t n = 0;
  for (const auto& r : records) n = std::max(n, r.iterations.size() + 1);
  return n;
}

}  // namespace

std::vector<double> padded_regret_curve(const RunRecord& record, std::size_t length) {
  std::vector<double> curve = record.regret_curve();
  const double pad = record.termination == "regret_floor" ? record.regret_floor : curve.back();
  while (curve.size() < length) curve.push_back(pad);
  return curve;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<CurvePoint> aggregate_curves(const std::vector<RunRecord>& records) {
  if (records.empty()) throw InputError("aggregate_curves needs at least one record");
  const std::size_t length = longest(records);
  std::vector<std::vector<double>> curves;
  for (const auto& r : records) curves.push_back(padded_regret_curve(r, length));

  std::vector<double> errors(length, 0.0);
  bool with_errors = std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.simulated; });
  if (with_errors) errors = error_curve(records);

  const double n = static_cast<double>(records.size());
  std::vector<CurvePoint> out;
  for (std::size_t t = 0; t < length; ++t) {
    std::vector<double> column;
    for (const auto& c : curves) column.push_back(c[t]);
    CurvePoint p;
    p.iteration = static_cast<int>(t);
    double sum = 0.0;
    for (double v : column) sum += v;
    p.mean = sum / n;
    p.median = median(column);
    if (records.size() > 1) {
      double ss = 0.0;
      for (double v : column) ss += (v - p.mean) * (v - p.mean);
      p.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    p.errors = errors[t];
    out.push_back(p);
  }
  return out;
}

std::vector<double> error_curve(const std::vector<RunRecord>& records) {
  if (records.empty()) throw InputError("error_curve needs at least one record");
  const std::size_t length = longest(records);
  std::vector<double> mean(length, 0.0);
  for (const auto& r : records) {
    if (!r.simulated) throw InputError("error_curve needs simulated records; human sessions have no ground truth");
    int count = 0;
    for (std::size_t t = 0; t < length; ++t) {
      if (t >= 1 && t <= r.iterations.size() && r.iterations[t - 1].was_error) ++count;
      mean[t] += count;
    }
  }
  for (double& v : mean) v /= static_cast<double>(records.size());
  return mean;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "iteration,regret_mean,regret_median,regret_se,errors\n";
  for (const auto& p : curve)
    out << p.iteration << ',' << fmt(p.mean) << ',' << fmt(p.median) << ',' << fmt(p.se) << ',' << fmt(p.errors)
        << '\n';
  return out.str();
}

double sign_test_p_value(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  // P(X ≤ k) for X ~ Binomial(n, ½), summed in log space.
  double tail = 0.0;
  for (int i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

ConditionTable compare_conditions(const std::map<std::string, std::map<std::uint64_t, double>>& final_regrets) {
  if (final_regrets.size() < 2) throw InputError("compare_conditions needs at least two conditions");
  const auto& reference = final_regrets.begin()->second;
  if (reference.empty()) throw InputError("compare_conditions needs at least one seed");
  for (const auto& [name, by_seed] : final_regrets) {
    bool same = by_seed.size() == reference.size();
    for (auto a = by_seed.begin(), b = reference.begin(); same && a != by_seed.end(); ++a, ++b)
      same = a->first == b->first;
    if (!same) throw InputError("condition '" + name + "' does not share the seed set of the others");
  }

  ConditionTable table;
  for (const auto& [name, by_seed] : final_regrets) {
    std::vector<double> values;
    for (const auto& [seed, v] : by_seed) values.push_back(v);
    table.conditions.push_back({name, median(values), 0});
  }
  for (auto& c : table.conditions) {
    int better = 0;
    for (const auto& o : table.conditions) better += o.median_final_regret < c.median_final_regret ? 1 : 0;
    c.rank = better + 1;
  }

  for (auto a = final_regrets.begin(); a != final_regrets.end(); ++a) {
    for (auto b = std::next(a); b != final_regrets.end(); ++b) {
      PairedComparison pc;
      pc.first = a->first;
      pc.second = b->first;
      std::vector<double> diffs;
      for (const auto& [seed, va] : a->second) {
        const double vb = b->second.at(seed);
        diffs.push_back(vb - va);
        if (va < vb) ++pc.first_wins;
        else if (vb < va) ++pc.second_wins;
        else ++pc.ties;
      }
      pc.median_difference = median(diffs);
      pc.p_value = sign_test_p_value(pc.first_wins, pc.second_wins);
      table.comparisons.push_back(pc);
    }
  }
  return table;
}

std::string condition_table_csv(const ConditionTable& table) {
  std::ostringstream out;
  out << "condition,median_final_regret,rank\n";
  for (const auto& c : table.conditions) out << c.name << ',' << fmt(c.median_final_regret) << ',' << c.rank << '\n';
  out << "\nfirst,second,first_wins,second_wins,ties,median_difference,p_value\n";
  for (const auto& p : table.comparisons)
    out << p.first << ',' << p.second << ',' << p.first_wins << ',' << p.second_wins << ',' << p.ties << ','
        << fmt(p.median_difference) << ',' << fmt(p.p_value) << '\n';
  return out.str();
}

}  // namespace bope
