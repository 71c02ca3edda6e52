#ifndef BOPE_SERVICE_HPP
#define BOPE_SERVICE_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bope/loop.hpp"

namespace bope {

enum class SessionPhase { Idle, Experimenting, AwaitingPreference, Finished };

std::string to_string(SessionPhase p);
SessionPhase session_phase_from_string(std::string_view name);

struct SessionQuestion {
  int id = 0;
  int first = -1;  // observation columns
  int second = -1;
  int iteration = 0;  // experiments completed when asked; 0 during warm-up
  bool warmup = false;
  bool fallback = false;
  std::optional<int> label;  // +1, −1 or 0 once answered
};

struct SessionIteration {
  int iteration = 0;
  DesignPoint x;
  OutputVector y;
  double acquisition_value = 0.0;
  std::vector<int> ranking;  // observation columns, best model mean first (top 5)
};

/// Everything needed to resume a live session. Stored as one JSON document.
struct SessionState {
  std::string id;
  RunConfig config;
  SessionPhase phase = SessionPhase::Idle;
  Eigen::MatrixXd designs;  // dim × n
  Eigen::MatrixXd outputs;  // k × n
  Eigen::VectorXd output_lower;  // axis ranges for display
  Eigen::VectorXd output_upper;
  std::vector<SessionQuestion> questions;
  std::vector<SessionIteration> iterations;
  std::string created;
  std::string updated;

  int answered() const;
  const SessionQuestion* pending() const;
};

std::string session_to_json(const SessionState& state);
/// Throws InputError on malformed input.
SessionState session_from_json(std::string_view text);

/// Live sessions driven by a human decision maker. Each call returns an
/// HTTP-style status and a JSON body; mutations within one session are
/// serialized and every transition is persisted before the reply.
///
/// Warm-up: the first init_comparisons steps ask random pairs of initial
/// outputs. After that a step runs one Experimentation stage and asks the
/// pair chosen by the configured criterion.
class SessionStore {
 public:
  struct Reply {
    int status = 200;
    std::string body;
  };

  /// Loads every persisted session found in `dir` (created if missing). A
  /// session saved mid-step resumes in Idle; the step is deterministic.
  explicit SessionStore(std::filesystem::path dir);

  Reply create(std::string_view body);
  Reply get(const std::string& id);
  Reply step(const std::string& id);
  Reply preference(const std::string& id, std::string_view body);
  Reply trace(const std::string& id);

  std::vector<std::string> ids() const;

 private:
  struct Entry {
    std::mutex mutation;        // held for the whole of a mutating request
    mutable std::mutex state_mutex;  // guards `state` for short reads and swaps
    SessionState state;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(const SessionState& state) const;
  void publish(Entry& entry, const SessionState& state) const;

  std::filesystem::path dir_;
  mutable std::mutex index_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// JSON-over-HTTP front end for a SessionStore.
///   POST /sessions                     body: run configuration → {id}
///   GET  /sessions/{id}                session summary
///   POST /sessions/{id}/step           next pair to judge
///   POST /sessions/{id}/preference     {"choice": 1 | 2 | "tie"}
///   GET  /sessions/{id}/trace          iteration and question history
class HttpService {
 public:
  explicit HttpService(SessionStore& store);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws InputError when binding fails.
  int start(const std::string& host, int port);
  /// Blocks in the calling thread until stop() is called.
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bope

#endif  // BOPE_SERVICE_HPP
