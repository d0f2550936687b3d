#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "microorch/wire.hpp"

using namespace microorch;

namespace {

WireErrc decode_error(const std::string& line) {
  try {
    decode_event(line);
  } catch (const WireError& err) {
    return err.code();
  }
  FAIL("expected a WireError");
  return WireErrc::MalformedJson;
}

/// Collects served events and lets tests wait for a count with a deadline.
struct EventSink {
  std::mutex mutex;
  std::condition_variable cv;
  std::vector<EventMsg> events;

  void push(const EventMsg& msg) {
    {
      std::lock_guard lock(mutex);
      events.push_back(msg);
    }
    cv.notify_all();
  }
  bool wait_for_count(std::size_t n, int timeout_ms = 5000) {
    std::unique_lock lock(mutex);
    return cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                       [&] { return events.size() >= n; });
  }
  std::vector<EventMsg> snapshot() {
    std::lock_guard lock(mutex);
    return events;
  }
};

}  // namespace

TEST_CASE("encode_event: exact wire bytes, fixed key order") {
  CHECK(encode_event({1, 0, 2}) == "{\"seq\":1,\"ts_ms\":0,\"faces\":2}\n");
}

TEST_CASE("event codec: round-trip identity over randomized messages") {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 500; ++i) {
    EventMsg msg{rng(), rng() % 1000000, static_cast<std::int64_t>(rng() % 100)};
    CHECK(decode_event(encode_event(msg)) == msg);
  }
  CHECK(decode_event("{\"seq\":1,\"ts_ms\":0,\"faces\":2}") == EventMsg{1, 0, 2});
}

TEST_CASE("decode_event: each defect has its own error code") {
  CHECK(decode_error("") == WireErrc::MalformedJson);
  CHECK(decode_error("{\"seq\":1,") == WireErrc::MalformedJson);
  CHECK(decode_error("[1,2,3]") == WireErrc::MalformedJson);
  CHECK(decode_error("{\"seq\":1,\"faces\":2}") == WireErrc::MissingField);
  CHECK(decode_error("{\"seq\":1,\"ts_ms\":0.5,\"faces\":2}") == WireErrc::MissingField);
  CHECK(decode_error("{\"seq\":1,\"ts_ms\":0,\"faces\":\"two\"}") == WireErrc::MissingField);
  CHECK(decode_error("{\"seq\":2,\"ts_ms\":0,\"faces\":-1}") == WireErrc::NegativeFaces);
}

TEST_CASE("telemetry codec: wire format mirrors the log line") {
  TelemetrySample s;
  s.ts_ms = 100.0;
  s.rails = {{"apu", 1.0}, {"pl0", 0.5}};
  s.total_w = 1.5;
  s.exec_time_ms = 0.5;
  s.faces = 1;
  s.config = {Variant::SoftwareFloat, 1024};
  std::string bytes = encode_telemetry(s);
  CHECK(bytes.back() == '\n');
  CHECK(bytes.substr(0, bytes.size() - 1) == to_json_line(s));
  CHECK(decode_telemetry(bytes) == s);
  CHECK_THROWS_AS(decode_telemetry("nope"), WireError);
  CHECK_THROWS_AS(decode_telemetry("{}"), WireError);
}

TEST_CASE("trace parsing: header, ordering, value checks") {
  EventTrace trace = EventTrace::from_csv_text("offset_ms,faces\n0,0\n100,1\n100,2\n300,3\n");
  REQUIRE(trace.entries.size() == 4);
  CHECK(trace.entries[2] == TraceEntry{100, 2});

  CHECK(EventTrace::from_csv_text("offset_ms,faces\n").entries.empty());
  CHECK(EventTrace::from_csv_text("offset_ms,faces\r\n10,1\r\n").entries.size() == 1);

  auto rejects = [](const std::string& text) {
    try {
      EventTrace::from_csv_text(text);
      FAIL("expected BadTrace for: ", text);
    } catch (const WireError& err) {
      CHECK(err.code() == WireErrc::BadTrace);
    }
  };
  rejects("");
  rejects("faces,offset_ms\n0,0\n");
  rejects("offset_ms,faces\n100,1\n50,2\n");  // decreasing offsets
  rejects("offset_ms,faces\n0,-1\n");
  rejects("offset_ms,faces\nabc,1\n");
  rejects("offset_ms,faces\n10\n");
}

TEST_CASE("line splitter: reassembles lines across arbitrary chunking") {
  LineSplitter splitter;
  std::vector<std::string> lines;
  for (const std::string& chunk : {std::string("{\"a\""), std::string(":1}\r\nsecond"),
                                   std::string(" line\nthi"), std::string("rd\n")}) {
    for (std::string& line : splitter.feed(chunk)) lines.push_back(std::move(line));
  }
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "{\"a\":1}");
  CHECK(lines[1] == "second line");
  CHECK(lines[2] == "third");
  CHECK(splitter.oversized() == 0);
}

TEST_CASE("line splitter: hostile long lines are dropped without hurting framing") {
  LineSplitter splitter(16);
  std::string flood(1000, 'x');
  CHECK(splitter.feed(flood).empty());
  auto lines = splitter.feed("stillgoing\nok\n");
  REQUIRE(lines.size() == 1);  // the flood's tail is discarded with it
  CHECK(lines[0] == "ok");
  CHECK(splitter.oversized() == 1);
}

TEST_CASE("server and replay: loopback delivery in seq order") {
  EventSink sink;
  EventServer server(Endpoint{"127.0.0.1", 0}, [&](const EventMsg& m) { sink.push(m); });
  server.start();
  REQUIRE(server.port() != 0);

  EventTrace trace;
  for (std::uint64_t i = 0; i < 20; ++i) {
    trace.entries.push_back({i * 10, static_cast<std::int64_t>(i % 5)});
  }
  ReplayOptions options;
  options.speed = std::numeric_limits<double>::infinity();
  replay(trace, Endpoint{"127.0.0.1", server.port()}, options);

  REQUIRE(sink.wait_for_count(20));
  auto events = sink.snapshot();
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].seq == i + 1);  // replay numbers from 1
    CHECK(events[i].ts_ms == trace.entries[i].offset_ms);
    CHECK(events[i].faces == trace.entries[i].faces);
  }
  ServerStats stats = server.stats();
  CHECK(stats.events_delivered == 20);
  CHECK(stats.decode_errors == 0);
  server.stop();
}

TEST_CASE("replay: empty trace returns immediately, dead endpoint fails bounded") {
  replay(EventTrace{}, Endpoint{"127.0.0.1", 1}, {});  // no connection attempted

  EventTrace one;
  one.entries.push_back({0, 0});
  ReplayOptions options;
  options.max_attempts = 2;
  options.backoff_ms = 10;
  try {
    replay(one, Endpoint{"127.0.0.1", 1}, options);
    FAIL("expected ConnectFailed");
  } catch (const WireError& err) {
    CHECK(err.code() == WireErrc::ConnectFailed);
  }
}

TEST_CASE("server: garbage interleaved with valid lines never breaks delivery") {
  EventSink sink;
  EventServer server(Endpoint{"127.0.0.1", 0}, [&](const EventMsg& m) { sink.push(m); });
  server.start();

  auto client = connect_to(Endpoint{"127.0.0.1", server.port()});
  REQUIRE(client.has_value());
  std::string stream;
  stream += encode_event({1, 0, 1});
  stream += "this is not json\n";
  stream += encode_event({2, 5, 2});
  stream += "{\"seq\":3,\"ts_ms\":1,\"faces\":-4}\n";
  stream += std::string(100000, 'z') + "\n";  // oversized
  stream += encode_event({3, 9, 0});
  REQUIRE(client->send_all(stream));

  REQUIRE(sink.wait_for_count(3));
  auto events = sink.snapshot();
  CHECK(events[0].seq == 1);
  CHECK(events[1].seq == 2);
  CHECK(events[2].seq == 3);
  ServerStats stats = server.stats();
  CHECK(stats.events_delivered == 3);
  CHECK(stats.decode_errors == 2);  // garbage text + negative faces
  client->close();
  server.stop();
  CHECK(server.stats().oversized_lines == 1);
}

TEST_CASE("server: non-monotone seq is dropped and counted per connection") {
  EventSink sink;
  EventServer server(Endpoint{"127.0.0.1", 0}, [&](const EventMsg& m) { sink.push(m); });
  server.start();
  Endpoint endpoint{"127.0.0.1", server.port()};

  {
    auto client = connect_to(endpoint);
    REQUIRE(client.has_value());
    std::string stream = encode_event({5, 0, 1}) + encode_event({5, 1, 2}) +
                         encode_event({4, 2, 3}) + encode_event({6, 3, 4});
    REQUIRE(client->send_all(stream));
    REQUIRE(sink.wait_for_count(2));
    CHECK(server.stats().dropped_nonmonotone == 2);
  }

  // A fresh connection restarts the monotone check.
  {
    auto client = connect_to(endpoint);
    REQUIRE(client.has_value());
    REQUIRE(client->send_all(encode_event({1, 0, 9})));
    REQUIRE(sink.wait_for_count(3));
  }
  auto events = sink.snapshot();
  CHECK(events[0].seq == 5);
  CHECK(events[1].seq == 6);
  CHECK(events[2].seq == 1);
  CHECK(server.stats().connections == 2);
  server.stop();
}

TEST_CASE("server: disconnect hook fires after the client goes away") {
  std::atomic<int> disconnects{0};
  EventServer server(Endpoint{"127.0.0.1", 0}, [](const EventMsg&) {});
  server.set_on_disconnect([&] { disconnects.fetch_add(1); });
  server.start();
  {
    auto client = connect_to(Endpoint{"127.0.0.1", server.port()});
    REQUIRE(client.has_value());
  }
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (disconnects.load() == 0 && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  CHECK(disconnects.load() == 1);
  server.stop();
}

TEST_CASE("server: binding a taken port raises BindFailed") {
  EventServer first(Endpoint{"127.0.0.1", 0}, [](const EventMsg&) {});
  first.start();
  EventServer second(Endpoint{"127.0.0.1", first.port()}, [](const EventMsg&) {});
  try {
    second.start();
    FAIL("expected BindFailed");
  } catch (const WireError& err) {
    CHECK(err.code() == WireErrc::BindFailed);
  }
  first.stop();
}
