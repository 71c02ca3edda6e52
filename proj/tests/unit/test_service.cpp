#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

// Eigen before httplib: resolv.h defines a _res macro that clashes with Eigen.
#include "bope/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace bope;
using json = nlohmann::json;

namespace {

const char* kQuickSession = R"({
  "problem": "DTLZ2", "iterations": 2, "init_comparisons": 2, "seed": 3,
  "ensemble": {"size": 2, "epochs": 200, "cosine_period": 200},
  "acquisition": {"posterior_samples": 8, "raw_samples": 32, "restarts": 2, "refine_iterations": 5},
  "gp": {"restarts": 2, "max_iterations": 40}
})";

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

json body(const SessionStore::Reply& r) { return json::parse(r.body); }

std::string create(SessionStore& store, const char* config = kQuickSession) {
  const auto r = store.create(config);
  REQUIRE(r.status == 201);
  return body(r).at("id").get<std::string>();
}

std::string phase(SessionStore& store, const std::string& id) { return body(store.get(id)).at("phase"); }

}  // namespace

TEST_CASE("session lifecycle and out-of-phase requests") {
  TempDir dir("bope_test_sessions_lifecycle");
  SessionStore store(dir.path);
  const auto id = create(store);
  CHECK(phase(store, id) == "Idle");
  CHECK(store.preference(id, R"({"choice": 1})").status == 409);

  // Warm-up questions.
  for (int q = 0; q < 2; ++q) {
    const auto s = store.step(id);
    REQUIRE(s.status == 200);
    CHECK(body(s).at("pending").at("warmup") == true);
    CHECK(store.step(id).status == 409);
    CHECK(store.preference(id, R"({"choice": 7})").status == 400);
    CHECK(store.preference(id, "not json").status == 400);
    CHECK(store.preference(id, R"({"choice": 1, "question_id": 999})").status == 409);
    CHECK(store.preference(id, q == 0 ? R"({"choice": 1})" : R"({"choice": "tie"})").status == 200);
    CHECK(store.preference(id, R"({"choice": 2})").status == 409);
  }

  // Experimentation steps.
  json last_pending;
  for (int t = 1; t <= 2; ++t) {
    const auto s = store.step(id);
    REQUIRE(s.status == 200);
    const json b = body(s);
    CHECK(b.at("phase") == "AwaitingPreference");
    CHECK(b.at("iteration") == t);
    const json pending = b.at("pending");
    CHECK(pending.at("warmup") == false);
    if (!last_pending.is_null() && !pending.at("fallback").get<bool>())
      CHECK((pending.at("first").at("index") != last_pending.at("first").at("index") ||
             pending.at("second").at("index") != last_pending.at("second").at("index")));
    last_pending = pending;
    const auto answered = store.preference(id, R"({"choice": "2"})");
    REQUIRE(answered.status == 200);
    CHECK(body(answered).at("recorded").at("label") == -1);
  }
  CHECK(phase(store, id) == "Finished");
  CHECK(store.step(id).status == 409);
  CHECK(store.preference(id, R"({"choice": 1})").status == 409);

  const json trace = body(store.trace(id));
  CHECK(trace.at("iterations").size() == 2);
  CHECK(trace.at("questions").size() == 4);
  CHECK(trace.at("questions")[1].at("label") == 0);
  CHECK(store.get("missing").status == 404);
  CHECK(store.step("missing").status == 404);
  CHECK(store.preference("missing", "{}").status == 404);
}

TEST_CASE("invalid session requests") {
  TempDir dir("bope_test_sessions_invalid");
  SessionStore store(dir.path);
  CHECK(store.create("{").status == 400);
  const auto bad = store.create(R"({"problem": "Nope"})");
  CHECK(bad.status == 400);
  CHECK(body(bad).at("field") == "problem");
  CHECK(store.create(R"({"iterations": -1})").status == 400);
  CHECK(store.create(R"({"algorithm": "KnownUtility"})").status == 400);
  CHECK(store.ids().empty());
}

TEST_CASE("a session busy experimenting rejects other mutations") {
  TempDir dir("bope_test_sessions_busy");
  SessionStore store(dir.path);
  const auto id = create(store, R"({"problem": "DTLZ2", "iterations": 1, "init_comparisons": 1, "seed": 1,
                                    "ensemble": {"size": 4}, "acquisition": {"raw_samples": 128}})");
  REQUIRE(store.step(id).status == 200);
  REQUIRE(store.preference(id, R"({"choice": 1})").status == 200);
  auto running = std::async(std::launch::async, [&] { return store.step(id); });
  bool seen = false;
  while (running.wait_for(std::chrono::milliseconds(1)) != std::future_status::ready) {
    if (phase(store, id) == "Experimenting") {
      seen = true;
      CHECK(store.step(id).status == 409);
      CHECK(store.preference(id, R"({"choice": 1})").status == 409);
      break;
    }
  }
  CHECK(running.get().status == 200);
  CHECK(seen);
}

TEST_CASE("sessions survive a restart") {
  TempDir dir("bope_test_sessions_restart");
  std::string id, before;
  {
    SessionStore store(dir.path);
    id = create(store);
    store.step(id);
    store.preference(id, R"({"choice": 1})");
    store.step(id);
    before = store.get(id).body;
  }
  SessionStore reloaded(dir.path);
  CHECK(reloaded.ids() == std::vector<std::string>{id});
  CHECK(reloaded.get(id).body == before);
  CHECK(reloaded.preference(id, R"({"choice": 2})").status == 200);
}

TEST_CASE("session documents round trip") {
  TempDir dir("bope_test_sessions_doc");
  SessionStore store(dir.path);
  const auto id = create(store);
  store.step(id);
  const auto file = dir.path / (id + ".json");
  REQUIRE(std::filesystem::exists(file));
  std::ifstream in(file);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto state = session_from_json(text);
  CHECK(session_to_json(state) == text);
  CHECK(state.pending() != nullptr);
  CHECK(state.phase == SessionPhase::AwaitingPreference);
}

TEST_CASE("HTTP round trip") {
  TempDir dir("bope_test_sessions_http");
  SessionStore store(dir.path);
  HttpService service(store);
  const int port = service.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(120, 0);

  auto created = client.Post("/sessions", kQuickSession, "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body).at("id");

  auto step = client.Post("/sessions/" + id + "/step", "", "application/json");
  REQUIRE(step);
  CHECK(step->status == 200);
  auto pref = client.Post("/sessions/" + id + "/preference", R"({"choice": 1})", "application/json");
  REQUIRE(pref);
  CHECK(pref->status == 200);
  auto again = client.Post("/sessions/" + id + "/preference", R"({"choice": 1})", "application/json");
  REQUIRE(again);
  CHECK(again->status == 409);
  auto got = client.Get("/sessions/" + id);
  REQUIRE(got);
  CHECK(json::parse(got->body).at("answered") == 1);
  auto trace = client.Get("/sessions/" + id + "/trace");
  REQUIRE(trace);
  CHECK(trace->status == 200);
  auto missing = client.Get("/sessions/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  service.stop();
}
