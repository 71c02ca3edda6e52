// bope: command-line entry points.
//
//   bope run     --config run.yaml [--seed N] [--set key=value]... [--out DIR]
//   bope bench   --config matrix.yaml [--parallel N] [--out DIR]
//   bope metrics --records PATH... [--out DIR]
//   bope serve   --bind HOST:PORT --dir SESSIONS
//
// Exit codes: 0 success, 1 run failure, 2 configuration error.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "bope/config.hpp"
#include "bope/errors.hpp"
#include "bope/loop.hpp"
#include "bope/metrics.hpp"
#include "bope/record_io.hpp"
#include "bope/service.hpp"

namespace fs = std::filesystem;
using namespace bope;

namespace {

constexpr int kRunFailed = 1;
constexpr int kConfigError = 2;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string group_name(const RunRecord& r) {
  std::string name = r.problem + "_" + r.algorithm;
  if (!r.condition.empty()) name += "_" + r.condition;
  return name;
}

// Curves per group plus one long-form CSV; condition tables per problem.
void write_reports(const std::vector<RunRecord>& records, const fs::path& out) {
  std::map<std::string, std::vector<RunRecord>> groups;
  for (const auto& r : records) groups[group_name(r)].push_back(r);

  std::string long_form = "group,iteration,regret_mean,regret_median,regret_se,errors\n";
  for (const auto& [name, members] : groups) {
    const auto curve = aggregate_curves(members);
    write_text(out / "curves" / (name + ".csv"), curve_csv(curve));
    std::istringstream lines(curve_csv(curve));
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) long_form += name + "," + line + "\n";
  }
  write_text(out / "curves.csv", long_form);

  std::map<std::string, std::map<std::string, std::map<std::uint64_t, double>>> by_problem;
  for (const auto& [name, members] : groups) {
    std::size_t length = 0;
    for (const auto& r : members) length = std::max(length, r.iterations.size() + 1);
    for (const auto& r : members) by_problem[r.problem][name][r.seed] = padded_regret_curve(r, length).back();
  }
  for (const auto& [problem, conditions] : by_problem) {
    if (conditions.size() < 2) continue;
    try {
      write_text(out / ("compare_" + problem + ".csv"), condition_table_csv(compare_conditions(conditions)));
    } catch (const InputError& e) {
      std::cerr << "comparison for " << problem << " skipped: " << e.what() << "\n";
    }
  }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::vector<std::string>& sets,
            const fs::path& out) {
  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
    for (const auto& s : sets) apply_override(cfg, s);
    if (seed) cfg.seed = *seed;
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kConfigError;
  }
  const RunRecord record = run(cfg);
  save_record(out / "run.jsonl", record);
  write_text(out / "run.csv", curve_csv(aggregate_curves({record})));
  std::printf("final regret %.6g after %zu iterations (%s)\n", record.regret_curve().back(), record.iterations.size(),
              record.termination.c_str());
  return record.termination.rfind("error", 0) == 0 ? kRunFailed : 0;
}

int cmd_bench(const std::string& config_path, int parallel, const fs::path& out) {
  BenchMatrix matrix;
  try {
    matrix = load_bench_matrix(config_path);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kConfigError;
  }
  const auto cells = matrix.cells();
  std::vector<std::optional<RunRecord>> results(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& cell = cells[i];
      try {
        RunRecord r = run(cell.config);
        r.condition = cell.condition;
        if (r.termination.rfind("error", 0) == 0) failures[i] = r.termination;
        results[i] = std::move(r);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
      std::lock_guard lock(log_mutex);
      std::fprintf(stderr, "[%zu/%zu] %s %s %s seed %llu %s\n", i + 1, cells.size(), cell.problem.c_str(),
                   cell.algorithm.c_str(), cell.condition.c_str(), static_cast<unsigned long long>(cell.seed),
                   failures[i].empty() ? "ok" : ("FAILED: " + failures[i]).c_str());
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < std::max(1, parallel); ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::vector<RunRecord> records;
  int failed = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!failures[i].empty()) ++failed;
    if (!results[i]) continue;
    const auto& c = cells[i];
    save_record(out / "records" / (c.problem + "_" + c.algorithm + "_" + c.condition + "_s" + std::to_string(c.seed) +
                                   ".jsonl"),
                *results[i]);
    records.push_back(*results[i]);
  }
  if (!records.empty()) write_reports(records, out);
  std::printf("%zu cells, %d failed\n", cells.size(), failed);
  return failed == 0 ? 0 : kRunFailed;
}

int cmd_metrics(const std::vector<std::string>& paths, const fs::path& out) {
  std::vector<RunRecord> records;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& f : fs::recursive_directory_iterator(p))
        if (f.path().extension() == ".jsonl") files.push_back(f.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) records.push_back(load_record(f));
    } else {
      records.push_back(load_record(p));
    }
  }
  if (records.empty()) {
    std::cerr << "no run records found\n";
    return kConfigError;
  }
  write_reports(records, out);
  std::printf("%zu records summarized into %s\n", records.size(), out.string().c_str());
  return 0;
}

HttpService* g_service = nullptr;

int cmd_serve(const std::string& bind, const fs::path& dir) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "--bind must look like HOST:PORT\n";
    return kConfigError;
  }
  const std::string host = bind.substr(0, colon);
  const int port = std::stoi(bind.substr(colon + 1));
  SessionStore store(dir);
  HttpService service(store);
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  std::printf("serving %zu persisted sessions on %s\n", store.ids().size(), bind.c_str());
  std::fflush(stdout);
  service.run(host, port);
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization with preference exploration"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string out = "out";
  int parallel = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::string> records;
  std::string bind = "127.0.0.1:8080";
  std::string dir = "sessions";

  auto* run_cmd = app.add_subcommand("run", "execute one run");
  run_cmd->add_option("--config", config, "run configuration (YAML)")->required();
  run_cmd->add_option("--seed", seed, "master seed override");
  run_cmd->add_option("--set", sets, "key=value override, repeatable");
  run_cmd->add_option("--out", out, "output directory");

  auto* bench_cmd = app.add_subcommand("bench", "run a problems x algorithms x seeds matrix");
  bench_cmd->add_option("--config", config, "matrix configuration (YAML)")->required();
  bench_cmd->add_option("--parallel", parallel, "concurrent cells");
  bench_cmd->add_option("--out", out, "output directory");

  auto* metrics_cmd = app.add_subcommand("metrics", "aggregate run records into CSV tables");
  metrics_cmd->add_option("--records", records, "record files or directories")->required();
  metrics_cmd->add_option("--out", out, "output directory");

  auto* serve_cmd = app.add_subcommand("serve", "HTTP session service for a human decision maker");
  serve_cmd->add_option("--bind", bind, "HOST:PORT");
  serve_cmd->add_option("--dir", dir, "session persistence directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config, seed, sets, out);
    if (*bench_cmd) return cmd_bench(config, parallel, out);
    if (*metrics_cmd) return cmd_metrics(records, out);
    if (*serve_cmd) return cmd_serve(bind, dir);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  }
  return 0;
}
