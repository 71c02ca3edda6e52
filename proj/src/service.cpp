#include "bope/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bope/config.hpp"
#include "bope/errors.hpp"

namespace bope {

namespace {

using json = nlohmann::ordered_json;

constexpr int kRankingSize = 5;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json columns(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(vec(m.col(c)));
  return out;
}

Eigen::MatrixXd columns_from(const json& j, Eigen::Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Eigen::VectorXd v = vec_from(j[c]);
    if (v.size() != rows) throw InputError("session matrix column has the wrong length");
    m.col(static_cast<Eigen::Index>(c)) = v;
  }
  return m;
}

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_id() {
  std::random_device rd;
  std::uniform_int_distribution<int> hex(0, 15);
  std::string id;
  for (int i = 0; i < 16; ++i) id += "0123456789abcdef"[hex(rd)];
  return id;
}

SessionStore::Reply reply(int status, const json& body) { return {status, body.dump()}; }

SessionStore::Reply error(int status, const std::string& message) { return reply(status, {{"error", message}}); }

int warmup_budget(const SessionState& s) {
  const int dim = static_cast<int>(s.designs.rows());
  return s.config.resolved_init_comparisons(dim);
}

int warmups_asked(const SessionState& s) {
  int n = 0;
  for (const auto& q : s.questions) n += q.warmup ? 1 : 0;
  return n;
}

bool finished_after_answer(const SessionState& s) {
  return warmups_asked(s) >= warmup_budget(s) && static_cast<int>(s.iterations.size()) >= s.config.iterations;
}

json objectives(const SessionState& s) {
  json out = json::array();
  for (Eigen::Index i = 0; i < s.outputs.rows(); ++i)
    out.push_back({{"name", "y" + std::to_string(i + 1)},
                   {"lower", s.output_lower.size() > i ? s.output_lower(i) : 0.0},
                   {"upper", s.output_upper.size() > i ? s.output_upper(i) : 0.0}});
  return out;
}

json question_view(const SessionState& s, const SessionQuestion& q) {
  json out = {{"id", q.id},
              {"iteration", q.iteration},
              {"warmup", q.warmup},
              {"fallback", q.fallback},
              {"first", {{"index", q.first}, {"output", vec(s.outputs.col(q.first))}}},
              {"second", {{"index", q.second}, {"output", vec(s.outputs.col(q.second))}}}};
  out["label"] = q.label ? json(*q.label) : json();
  return out;
}

json best_outputs(const SessionState& s) {
  json out = json::array();
  if (s.iterations.empty()) return out;
  for (int idx : s.iterations.back().ranking) out.push_back({{"index", idx}, {"output", vec(s.outputs.col(idx))}});
  return out;
}

json summary(const SessionState& s) {
  const SessionQuestion* q = s.pending();
  json out = {{"id", s.id},
              {"phase", to_string(s.phase)},
              {"created", s.created},
              {"updated", s.updated},
              {"problem", s.config.problem},
              {"algorithm", to_string(s.config.algorithm)},
              {"budget", s.config.iterations},
              {"iteration", s.iterations.size()},
              {"observations", s.outputs.cols()},
              {"answered", s.answered()},
              {"warmup_remaining", std::max(0, warmup_budget(s) - warmups_asked(s))},
              {"objectives", objectives(s)},
              {"best_outputs", best_outputs(s)}};
  out["pending"] = q ? question_view(s, *q) : json();
  return out;
}

ObservationSet observations(const SessionState& s) {
  ObservationSet data(static_cast<int>(s.designs.rows()), static_cast<int>(s.outputs.rows()));
  for (Eigen::Index c = 0; c < s.designs.cols(); ++c) data.add(s.designs.col(c), s.outputs.col(c));
  return data;
}

ComparisonSet comparisons(const SessionState& s) {
  ComparisonSet set(static_cast<int>(s.outputs.rows()));
  for (const auto& q : s.questions)
    if (q.label) set.add(s.outputs.col(q.first), s.outputs.col(q.second), *q.label);
  return set;
}

bool already_asked(const SessionState& s, int a, int b) {
  for (const auto& q : s.questions)
    if ((q.first == a && q.second == b) || (q.first == b && q.second == a)) return true;
  return false;
}

}  // namespace

std::string to_string(SessionPhase p) {
  switch (p) {
    case SessionPhase::Idle: return "Idle";
    case SessionPhase::Experimenting: return "Experimenting";
    case SessionPhase::AwaitingPreference: return "AwaitingPreference";
    case SessionPhase::Finished: return "Finished";
  }
  return "Idle";
}

SessionPhase session_phase_from_string(std::string_view name) {
  if (name == "Idle") return SessionPhase::Idle;
  if (name == "Experimenting") return SessionPhase::Experimenting;
  if (name == "AwaitingPreference") return SessionPhase::AwaitingPreference;
  if (name == "Finished") return SessionPhase::Finished;
  throw InputError("unknown session phase '" + std::string(name) + "'");
}

int SessionState::answered() const {
  int n = 0;
  for (const auto& q : questions) n += q.label ? 1 : 0;
  return n;
}

const SessionQuestion* SessionState::pending() const {
  if (phase != SessionPhase::AwaitingPreference || questions.empty() || questions.back().label) return nullptr;
  return &questions.back();
}

std::string session_to_json(const SessionState& s) {
  json j = {{"schema", "bope.session/1"},
            {"id", s.id},
            {"config", json::parse(run_config_to_json(s.config))},
            {"phase", to_string(s.phase)},
            {"dim", s.designs.rows()},
            {"num_outputs", s.outputs.rows()},
            {"designs", columns(s.designs)},
            {"outputs", columns(s.outputs)},
            {"output_lower", vec(s.output_lower)},
            {"output_upper", vec(s.output_upper)},
            {"created", s.created},
            {"updated", s.updated}};
  json qs = json::array();
  for (const auto& q : s.questions) {
    json e = {{"id", q.id},           {"first", q.first},     {"second", q.second},
              {"iteration", q.iteration}, {"warmup", q.warmup}, {"fallback", q.fallback}};
    e["label"] = q.label ? json(*q.label) : json();
    qs.push_back(e);
  }
  j["questions"] = qs;
  json its = json::array();
  for (const auto& it : s.iterations)
    its.push_back({{"iteration", it.iteration},
                   {"x", vec(it.x)},
                   {"y", vec(it.y)},
                   {"acquisition_value", it.acquisition_value},
                   {"ranking", it.ranking}});
  j["iterations"] = its;
  return j.dump();
}

SessionState session_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != "bope.session/1") throw InputError("unsupported session schema");
    SessionState s;
    s.id = j.at("id").get<std::string>();
    s.config = parse_run_config(j.at("config").dump());
    s.phase = session_phase_from_string(j.at("phase").get<std::string>());
    const auto dim = j.at("dim").get<Eigen::Index>();
    const auto k = j.at("num_outputs").get<Eigen::Index>();
    s.designs = columns_from(j.at("designs"), dim);
    s.outputs = columns_from(j.at("outputs"), k);
    if (s.designs.cols() != s.outputs.cols()) throw InputError("design and output counts differ");
    s.output_lower = vec_from(j.at("output_lower"));
    s.output_upper = vec_from(j.at("output_upper"));
    s.created = j.at("created").get<std::string>();
    s.updated = j.at("updated").get<std::string>();
    for (const auto& e : j.at("questions")) {
      SessionQuestion q;
      q.id = e.at("id").get<int>();
      q.first = e.at("first").get<int>();
      q.second = e.at("second").get<int>();
      q.iteration = e.at("iteration").get<int>();
      q.warmup = e.at("warmup").get<bool>();
      q.fallback = e.at("fallback").get<bool>();
      if (!e.at("label").is_null()) q.label = e.at("label").get<int>();
      if (q.first < 0 || q.second < 0 || q.first >= s.outputs.cols() || q.second >= s.outputs.cols())
        throw InputError("question refers to a missing observation");
      s.questions.push_back(q);
    }
    for (const auto& e : j.at("iterations")) {
      SessionIteration it;
      it.iteration = e.at("iteration").get<int>();
      it.x = vec_from(e.at("x"));
      it.y = vec_from(e.at("y"));
      it.acquisition_value = e.at("acquisition_value").get<double>();
      it.ranking = e.at("ranking").get<std::vector<int>>();
      s.iterations.push_back(std::move(it));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed session: ") + e.what());
  } catch (const ConfigError& e) {
    throw InputError(std::string("malformed session config: ") + e.what());
  }
}

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& file : std::filesystem::directory_iterator(dir_)) {
    if (file.path().extension() != ".json") continue;
    std::ifstream in(file.path());
    std::ostringstream ss;
    ss << in.rdbuf();
    SessionState state = session_from_json(ss.str());
    if (state.phase == SessionPhase::Experimenting) state.phase = SessionPhase::Idle;
    auto entry = std::make_shared<Entry>();
    entry->state = std::move(state);
    sessions_[entry->state.id] = entry;
  }
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(index_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, e] : sessions_) out.push_back(id);
  return out;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(index_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void SessionStore::persist(const SessionState& state) const {
  const auto target = dir_ / (state.id + ".json");
  const auto tmp = dir_ / (state.id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << session_to_json(state);
  }
  std::filesystem::rename(tmp, target);
}

void SessionStore::publish(Entry& entry, const SessionState& state) const {
  persist(state);
  std::lock_guard lock(entry.state_mutex);
  entry.state = state;
}

SessionStore::Reply SessionStore::create(std::string_view body) {
  RunConfig cfg;
  try {
    const std::string text = body.empty() ? std::string("{}") : std::string(body);
    if (!json::accept(text)) return error(400, "request body is not valid JSON");
    cfg = parse_run_config(text);
  } catch (const ConfigError& e) {
    json out = {{"error", e.what()}, {"field", e.field()}};
    return reply(400, out);
  }
  if (cfg.algorithm == Algorithm::KnownUtility)
    return reply(400, {{"error", "KnownUtility needs the true utility and cannot run with a human"},
                       {"field", "algorithm"}});
  cfg.dm.model = DmModel::LiveHuman;

  SessionState s;
  s.id = new_id();
  while (find(s.id)) s.id = new_id();
  s.config = cfg;
  const OutputProblem problem = make_problem(cfg.problem);
  const ObservationSet data =
      initial_observations(problem, cfg.resolved_init_observations(problem.dim()), derive_seed(cfg.seed, "init-designs"));
  s.designs = data.designs();
  s.outputs = data.outputs();
  const OutputRanges ranges = estimate_output_ranges(problem, 1 << 12);
  s.output_lower = ranges.lower;
  s.output_upper = ranges.upper;
  s.created = s.updated = now_iso();
  try {
    random_pairs(s.outputs, warmup_budget(s), 0);
  } catch (const ConfigError& e) {
    return reply(400, {{"error", e.what()}, {"field", e.field()}});
  }
  if (warmup_budget(s) == 0 && cfg.iterations == 0) s.phase = SessionPhase::Finished;

  auto entry = std::make_shared<Entry>();
  persist(s);
  entry->state = s;
  {
    std::lock_guard lock(index_mutex_);
    sessions_[s.id] = entry;
  }
  return reply(201, {{"id", s.id}, {"phase", to_string(s.phase)}});
}

SessionStore::Reply SessionStore::get(const std::string& id) {
  const auto entry = find(id);
  if (!entry) return error(404, "unknown session '" + id + "'");
  std::lock_guard lock(entry->state_mutex);
  return reply(200, summary(entry->state));
}

SessionStore::Reply SessionStore::trace(const std::string& id) {
  const auto entry = find(id);
  if (!entry) return error(404, "unknown session '" + id + "'");
  std::lock_guard lock(entry->state_mutex);
  const SessionState& s = entry->state;
  json its = json::array();
  for (const auto& it : s.iterations) {
    json ranked = json::array();
    for (int idx : it.ranking) ranked.push_back({{"index", idx}, {"output", vec(s.outputs.col(idx))}});
    its.push_back({{"iteration", it.iteration},
                   {"x", vec(it.x)},
                   {"y", vec(it.y)},
                   {"acquisition_value", it.acquisition_value},
                   {"ranking", ranked}});
  }
  json qs = json::array();
  for (const auto& q : s.questions) qs.push_back(question_view(s, q));
  return reply(200, {{"id", s.id}, {"phase", to_string(s.phase)}, {"iterations", its}, {"questions", qs}});
}

SessionStore::Reply SessionStore::step(const std::string& id) {
  const auto entry = find(id);
  if (!entry) return error(404, "unknown session '" + id + "'");
  std::unique_lock mutation(entry->mutation, std::try_to_lock);
  if (!mutation.owns_lock()) return error(409, "session is busy");
  SessionState s;
  {
    std::lock_guard lock(entry->state_mutex);
    s = entry->state;
  }
  if (s.phase != SessionPhase::Idle) return error(409, "step needs phase Idle, session is " + to_string(s.phase));

  const int next_question = static_cast<int>(s.questions.size()) + 1;
  const int asked = warmups_asked(s);
  if (asked < warmup_budget(s)) {
    const auto pairs = random_pairs(s.outputs, asked + 1, derive_seed(s.config.seed, "init-pairs"));
    SessionQuestion q;
    q.id = next_question;
    q.first = pairs.back().first;
    q.second = pairs.back().second;
    q.warmup = true;
    s.questions.push_back(q);
    s.phase = SessionPhase::AwaitingPreference;
    s.updated = now_iso();
    publish(*entry, s);
    return reply(200, summary(s));
  }
  if (static_cast<int>(s.iterations.size()) >= s.config.iterations) {
    s.phase = SessionPhase::Finished;
    s.updated = now_iso();
    publish(*entry, s);
    return reply(200, summary(s));
  }

  const SessionState before = s;
  s.phase = SessionPhase::Experimenting;
  s.updated = now_iso();
  publish(*entry, s);
  try {
    const OutputProblem problem = make_problem(s.config.problem);
    ObservationSet data = observations(s);
    const ComparisonSet comps = comparisons(s);
    const int t = static_cast<int>(s.iterations.size()) + 1;
    ExperimentOutcome exp = experiment(s.config, problem, nullptr, data, comps, t);

    SessionIteration it;
    it.iteration = t;
    it.x = exp.x;
    it.y = problem.evaluate(exp.x);
    it.acquisition_value = exp.acquisition_value;
    if (!data.contains(it.x)) {
      data.add(it.x, it.y);
      s.designs = data.designs();
      s.outputs = data.outputs();
    }

    SessionQuestion q;
    q.id = next_question;
    q.iteration = t;
    if (exp.ensemble) {
      const auto sel = select_pair(s.outputs, *exp.ensemble, comps, s.config.acquisition);
      q.first = sel.first;
      q.second = sel.second;
      q.fallback = sel.fallback;
      const auto beliefs = exp.ensemble->predict_beliefs(s.outputs);
      std::vector<int> order(beliefs.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return beliefs[static_cast<std::size_t>(a)].mean > beliefs[static_cast<std::size_t>(b)].mean;
      });
      order.resize(std::min<std::size_t>(order.size(), kRankingSize));
      it.ranking = order;
    } else {
      // Random: the first not-yet-asked pair in a seeded random order.
      const int n = static_cast<int>(s.outputs.cols());
      const auto pairs = random_pairs(s.outputs, n * (n - 1) / 2, derive_seed(s.config.seed, "session-pairs", t));
      q.fallback = true;
      q.first = pairs.front().first;
      q.second = pairs.front().second;
      for (const auto& [a, b] : pairs)
        if (!already_asked(s, a, b)) {
          q.first = a;
          q.second = b;
          q.fallback = false;
          break;
        }
    }
    s.iterations.push_back(std::move(it));
    s.questions.push_back(q);
    s.phase = SessionPhase::AwaitingPreference;
    s.updated = now_iso();
    publish(*entry, s);
    return reply(200, summary(s));
  } catch (const std::exception& e) {
    publish(*entry, before);
    return error(500, std::string("step failed: ") + e.what());
  }
}

SessionStore::Reply SessionStore::preference(const std::string& id, std::string_view body) {
  const auto entry = find(id);
  if (!entry) return error(404, "unknown session '" + id + "'");
  std::unique_lock mutation(entry->mutation, std::try_to_lock);
  if (!mutation.owns_lock()) return error(409, "session is busy");
  SessionState s;
  {
    std::lock_guard lock(entry->state_mutex);
    s = entry->state;
  }
  if (!s.pending()) return error(409, "no pending question, session is " + to_string(s.phase));

  int label = 0;
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("choice")) return error(400, "body must be {\"choice\": 1 | 2 | \"tie\"}");
  const json& c = j.at("choice");
  if (c == 1 || c == "1") label = 1;
  else if (c == 2 || c == "2") label = -1;
  else if (c == "tie") label = 0;
  else return error(400, "choice must be 1, 2 or \"tie\"");
  if (j.contains("question_id") && j.at("question_id") != s.questions.back().id)
    return error(409, "question " + j.at("question_id").dump() + " is not the pending question");

  s.questions.back().label = label;
  s.phase = finished_after_answer(s) ? SessionPhase::Finished : SessionPhase::Idle;
  s.updated = now_iso();
  publish(*entry, s);
  json out = summary(s);
  out["recorded"] = {{"question_id", s.questions.back().id}, {"label", label}};
  return reply(200, out);
}

struct HttpService::Impl {
  SessionStore& store;
  httplib::Server server;
  std::thread thread;

  explicit Impl(SessionStore& s) : store(s) {
    const auto send = [](httplib::Response& res, const SessionStore::Reply& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, store.create(req.body));
    });
    server.Get(R"(/sessions/([A-Za-z0-9]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, store.get(req.matches[1]));
    });
    server.Get(R"(/sessions/([A-Za-z0-9]+)/trace)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, store.trace(req.matches[1]));
    });
    server.Post(R"(/sessions/([A-Za-z0-9]+)/step)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, store.step(req.matches[1]));
    });
    server.Post(R"(/sessions/([A-Za-z0-9]+)/preference)",
                [this, send](const httplib::Request& req, httplib::Response& res) {
                  send(res, store.preference(req.matches[1], req.body));
                });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(json{{"error", message}}.dump(), "application/json");
    });
  }
};

HttpService::HttpService(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) bound = impl_->server.bind_to_any_port(host);
  else if (!impl_->server.bind_to_port(host, port)) bound = -1;
  if (bound <= 0) throw InputError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw InputError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace bope
