// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <regex>
#include <thread>

#include "preempt/predict.hpp"

// After Eigen: the resolver header it pulls in defines _res as a macro.
#include <httplib.h>

using namespace preempt;

namespace {

Trajectory track_of(std::initializer_list<Pixel> pixels, std::initializer_list<double> distances = {}) {
  Trajectory t(4, 8);
  int slot = 1;
  auto r = distances.begin();
  for (const auto& p : pixels) {
    const double d = r != distances.end() ? *r++ : 10.0;
    t.push({slot++, p, d, true});
  }
  return t;
}

// Replays canned answers in order; nullopt models a timeout.
class ScriptedEndpoint final : public PredictionEndpoint {
 public:
  std::deque<std::optional<std::string>> answers;
  std::vector<PromptRecord> asked;
  std::optional<std::string> query(const PromptRecord& prompt) override {
    asked.push_back(prompt);
    if (answers.empty()) return std::nullopt;
    auto a = answers.front();
    answers.pop_front();
    return a;
  }
};

std::vector<double> numbers_in(const std::string& text) {
  // Numbers with a decimal point, which excludes the subscripts.
  static const std::regex re(R"(-?\d+\.\d+)");
  std::vector<double> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it)
    out.push_back(std::stod(it->str()));
  return out;
}

}  // namespace

TEST_CASE("trajectory keeps a bounded increasing window") {
  Trajectory t(1, 3);
  for (int s = 1; s <= 5; ++s) t.push({s, {double(s), 0.0}, 1.0, s != 4});
  CHECK(t.size() == 3);
  CHECK(t.points().front().slot == 3);
  CHECK(t.last_slot() == 5);
  CHECK(t.visible_points().size() == 2);
  CHECK_THROWS_AS(t.push({5, {}, 1.0, true}), std::invalid_argument);
  CHECK_THROWS_AS(t.push({2, {}, 1.0, true}), std::invalid_argument);
}

TEST_CASE("linear extrapolation of the pixel track") {
  const Trajectory t = track_of({{930, 380}, {932, 377}, {935, 374}}, {12.3, 11.2, 10.3});
  const StatePrediction p = predict_next_state(t, PredictMethod::Linear, 4);
  CHECK(p.pixel.x == doctest::Approx(938));
  CHECK(p.pixel.y == doctest::Approx(371));
  CHECK(p.distance == doctest::Approx(9.4));
  CHECK(p.pixel_method == MethodUsed::Linear);
  CHECK_FALSE(p.degraded);

  // A two-slot gap doubles the last step.
  const StatePrediction far = predict_next_state(t, PredictMethod::Linear, 5);
  CHECK(far.pixel.x == doctest::Approx(941));
}

TEST_CASE("constant history is a fixed point") {
  const Trajectory t = track_of({{500, 300}, {500, 300}, {500, 300}}, {8, 8, 8});
  ScriptedEndpoint ep;
  ep.answers = {"(500.0, 300.0)", "r_4 = 8.0"};
  PredictorContext ctx{&ep, plausibility_gate(25 / 3.6, 0.1, 960, 8), {}};
  for (auto m : {PredictMethod::Linear, PredictMethod::Kalman, PredictMethod::External}) {
    const StatePrediction p = predict_next_state(t, m, 4, ctx);
    CHECK(p.pixel.x == doctest::Approx(500));
    CHECK(p.pixel.y == doctest::Approx(300));
    CHECK(p.distance == doctest::Approx(8));
  }
}

TEST_CASE("kalman is exact on a noiseless constant-velocity track") {
  Trajectory t(0, 8);
  for (int s = 0; s < 6; ++s) t.push({s, {100 + 3.5 * s, 200 - 1.25 * s}, 20 - 0.3 * s, true});
  const StatePrediction p = predict_next_state(t, PredictMethod::Kalman, 6);
  CHECK(std::abs(p.pixel.x - (100 + 3.5 * 6)) < 1e-6);
  CHECK(std::abs(p.pixel.y - (200 - 1.25 * 6)) < 1e-6);
  CHECK(std::abs(p.distance - (20 - 0.3 * 6)) < 1e-6);
  CHECK(p.pixel_method == MethodUsed::Kalman);
}

TEST_CASE("kalman beats last-difference extrapolation under pixel noise") {
  double err_k = 0.0, err_l = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const double vx = uniform(rng, -20, 20), vy = uniform(rng, -10, 10);
    Trajectory t(0, 10);
    for (int s = 0; s < 10; ++s)
      t.push({s, {960 + vx * s + standard_normal(rng), 540 + vy * s + standard_normal(rng)}, 10.0, true});
    const Pixel truth{960 + vx * 10, 540 + vy * 10};
    const auto k = predict_next_state(t, PredictMethod::Kalman, 10);
    const auto l = predict_next_state(t, PredictMethod::Linear, 10);
    err_k += std::hypot(k.pixel.x - truth.x, k.pixel.y - truth.y);
    err_l += std::hypot(l.pixel.x - truth.x, l.pixel.y - truth.y);
  }
  CHECK(err_k <= err_l);
}

TEST_CASE("short histories hold with a degraded flag") {
  const Trajectory empty(2, 3);
  for (auto m : {PredictMethod::Linear, PredictMethod::Kalman, PredictMethod::External}) {
    const auto p = predict_next_state(empty, m, 4);
    CHECK(p.degraded);
    CHECK(p.pixel_method == MethodUsed::Hold);
  }
  const Trajectory one = track_of({{10, 20}}, {5});
  for (auto m : {PredictMethod::Linear, PredictMethod::Kalman}) {
    const auto p = predict_next_state(one, m, 2);
    CHECK(p.degraded);
    CHECK(p.pixel.x == 10);
    CHECK(p.distance == 5);
  }
}

TEST_CASE("prompt text") {
  const Trajectory t = track_of({{930, 380}, {932, 377}, {935, 374}}, {12.3, 11.2, 10.3});
  const PromptRecord a = build_prompt(t, PromptKind::Angles);
  int clauses = 0;
  for (std::size_t pos = 0; (pos = a.text.find("(x_", pos)) != std::string::npos; ++pos)
    if (a.text.compare(a.text.find(')', pos) + 1, 3, " = ") == 0) ++clauses;
  CHECK(clauses == 3);
  CHECK(a.slot == 4);
  CHECK(a.user_id == 4);

  const PromptRecord d = build_prompt(t, PromptKind::Distance);
  CHECK(d.text.find("r_1 = 12.3, r_2 = 11.2, r_3 = 10.3, predict the next distance value r_4") != std::string::npos);
  CHECK(d.text == "Using the sequence of past distance values: r_1 = 12.3, r_2 = 11.2, r_3 = 10.3, "
                  "predict the next distance value r_4");

  CHECK(numbers_in(a.text) == std::vector<double>{930, 380, 932, 377, 935, 374});
  CHECK(numbers_in(d.text) == std::vector<double>{12.3, 11.2, 10.3});
  CHECK(build_prompt(t, PromptKind::Angles).text == a.text);
}

TEST_CASE("response parsing") {
  const auto pair = parse_pair_response("The next pair is (938, 371).");
  REQUIRE(pair);
  CHECK(pair->x == 938);
  CHECK(pair->y == 371);
  CHECK(parse_distance_response("r_4 = 9.4 meters") == 9.4);
  CHECK_FALSE(parse_pair_response("no idea"));
  CHECK_FALSE(parse_distance_response("no idea"));
}

TEST_CASE("external predictions retry once then fall back") {
  const Trajectory t = track_of({{930, 380}, {932, 377}, {935, 374}}, {12.3, 11.2, 10.3});
  const PredictorContext base{nullptr, plausibility_gate(25 / 3.6, 0.1, 960, 10.3), {}};

  SUBCASE("plausible first answers") {
    ScriptedEndpoint ep;
    ep.answers = {"(939, 372)", "9.5"};
    PredictorContext ctx = base;
    ctx.endpoint = &ep;
    const auto p = predict_next_state(t, PredictMethod::External, 4, ctx);
    CHECK(p.pixel.x == 939);
    CHECK(p.distance == 9.5);
    CHECK(p.pixel_method == MethodUsed::External);
    CHECK(p.distance_method == MethodUsed::External);
    CHECK_FALSE(p.fell_back);
    REQUIRE(ep.asked.size() == 2);
    CHECK(ep.asked[0].kind == PromptKind::Angles);
    CHECK(ep.asked[1].kind == PromptKind::Distance);
  }
  SUBCASE("implausible answer triggers the longer prompt") {
    ScriptedEndpoint ep;
    ep.answers = {"(5000, 5000)", "(940, 370)", "900", "9.3"};
    PredictorContext ctx = base;
    ctx.endpoint = &ep;
    const auto p = predict_next_state(t, PredictMethod::External, 4, ctx);
    CHECK(p.pixel.x == 940);
    CHECK(p.pixel_method == MethodUsed::ExternalRetry);
    CHECK(p.distance == 9.3);
    CHECK(p.distance_method == MethodUsed::ExternalRetry);
    REQUIRE(ep.asked.size() == 4);
    CHECK(ep.asked[1].text.find("implausible") != std::string::npos);
  }
  SUBCASE("timeouts and garbage fall back to linear") {
    ScriptedEndpoint ep;
    ep.answers = {std::nullopt, "nothing useful"};
    PredictorContext ctx = base;
    ctx.endpoint = &ep;
    const auto p = predict_next_state(t, PredictMethod::External, 4, ctx);
    CHECK(p.fell_back);
    CHECK(p.pixel.x == doctest::Approx(938));
    CHECK(p.distance == doctest::Approx(9.4));
    CHECK(p.pixel_method == MethodUsed::Linear);
  }
  SUBCASE("no endpoint at all") {
    const auto p = predict_next_state(t, PredictMethod::External, 4, base);
    CHECK(p.fell_back);
    CHECK(p.pixel.x == doctest::Approx(938));
  }
}

TEST_CASE("HTTP endpoint round trip, deadline and audit") {
  httplib::Server server;
  server.Post("/predict", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string text = body.at("kind") == "angles" ? "(938, 371)" : "9.4";
    res.set_content(nlohmann::json{{"text", text}}.dump(), "application/json");
  });
  server.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content(R"js({"text": "(1, 1)"})js", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  std::vector<nlohmann::json> audit;
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  HttpEndpoint ep(base + "/predict", std::chrono::milliseconds(1000), [&](const nlohmann::json& j) { audit.push_back(j); });
  const Trajectory t = track_of({{930, 380}, {932, 377}, {935, 374}}, {12.3, 11.2, 10.3});
  PredictorContext ctx{&ep, plausibility_gate(25 / 3.6, 0.1, 960, 10.3), {}};
  const auto p = predict_next_state(t, PredictMethod::External, 4, ctx);
  CHECK(p.pixel.x == 938);
  CHECK(p.distance == 9.4);
  CHECK_FALSE(p.fell_back);
  REQUIRE(audit.size() == 2);
  CHECK(audit[0]["event"] == "predictor_query");
  CHECK(audit[0]["response"] == "(938, 371)");
  CHECK(audit[1]["kind"] == "distance");

  HttpEndpoint slow(base + "/slow", std::chrono::milliseconds(50), [&](const nlohmann::json& j) { audit.push_back(j); });
  const auto t0 = std::chrono::steady_clock::now();
  CHECK_FALSE(slow.query(build_prompt(t, PromptKind::Angles)).has_value());
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(300));
  CHECK(audit.back().contains("error"));

  server.stop();
  worker.join();
  CHECK_THROWS(HttpEndpoint("localhost:1", std::chrono::milliseconds(10)));
}

TEST_CASE("blockage rule") {
  Detection box;
  box.kind = Detection::Kind::Obstacle;
  box.id = 7;
  box.pixel = {900, 500};
  box.w_img = 100;
  box.h_img = 200;
  box.depth = 5.0;
  Detection user_det = box;
  user_det.kind = Detection::Kind::User;
  user_det.depth = 100.0;
  const std::vector<Detection> dets{box, user_det};

  const std::vector<PositionPrediction> users{{0, {910, 520}, 10.0}, {1, {910, 520}, 4.0}, {2, {1200, 520}, 10.0}};
  const BlockagePrediction b = predict_blockage(users, dets);
  CHECK(b.los == std::vector<int>{0, 1, 1});
  CHECK(b.overlaps.pairs == std::vector<std::pair<int, int>>{{0, 7}, {1, 7}});

  // Each verdict depends only on that user's own prediction.
  const std::vector<PositionPrediction> swapped{users[2], users[0]};
  CHECK(predict_blockage(swapped, dets).los == std::vector<int>{1, 0});
}

TEST_CASE("AR forecasts") {
  const std::vector<Complex> flat(5, Complex{0.3, -0.2});
  CHECK(std::abs(ar_predict(flat, 2) - flat.back()) < 1e-12);

  const Complex rho{0.9, 0.2};
  std::vector<Complex> s{Complex{1.0, 0.5}};
  for (int i = 0; i < 5; ++i) s.push_back(rho * s.back());
  CHECK(std::abs(ar_predict(s, 1) - rho * s.back()) < 1e-8);
  CHECK(std::abs(ar_predict(s, 1, 3) - rho * rho * rho * s.back()) < 1e-8);

  const std::vector<Complex> one{Complex{2.0, 1.0}};
  CHECK(ar_predict(one, 2) == one[0]);
  CHECK_THROWS(ar_predict(std::vector<Complex>{}, 2));
}

TEST_CASE("parameter prediction") {
  PathParams strong{Complex{1.0, 0.0}, 20.0, 0.2, -0.1};
  PathParams weak{Complex{std::sqrt(1e-3), 0.0}, 25.0, -0.4, -0.05};

  std::vector<ParamObservation> hist;
  for (int s = 1; s <= 3; ++s) hist.push_back({s, Complex{0.5, 0.5}, {strong, weak}});
  const ParamPrediction p = predict_params(hist, 4);
  REQUIRE(p.los_gain);
  CHECK(std::abs(*p.los_gain - Complex{0.5, 0.5}) < 1e-12);
  REQUIRE(p.nlos.size() == 1);
  CHECK(p.nlos[0].score == 1.0);
  CHECK(std::abs(p.nlos[0].path.gain - strong.gain) < 1e-12);
  CHECK(p.nlos[0].path.azimuth == strong.azimuth);
  CHECK(p.nlos[0].path.distance == strong.distance);

  ParamSettings loose;
  loose.path_threshold_db = 40.0;
  CHECK(predict_params(hist, 4, loose).nlos.size() == 2);
  loose.max_paths = 1;
  CHECK(predict_params(hist, 4, loose).nlos.size() == 1);
  CHECK_FALSE(predict_params({}, 4).los_gain);
}

TEST_CASE("reconstruction") {
  const ArrayGeometry g;
  PredictionRecord blocked;
  blocked.los = 0;
  CHECK(reconstruct_channel(blocked, g).norm() == 0.0);

  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    ChannelParams truth;
    truth.los = trial % 3 != 0;
    truth.los_path = {complex_normal(rng, 1e-8), uniform(rng, 2, 30), uniform(rng, -1, 1), uniform(rng, -0.6, 0)};
    for (int l = 0; l < 3; ++l)
      truth.nlos.push_back({complex_normal(rng, 1e-9), uniform(rng, 5, 40), uniform(rng, -1, 1), uniform(rng, -0.5, 0.5)});
    const ChannelVector h = compose_channel(truth, g);
    const ChannelVector hr = reconstruct_channel(record_from_params(truth), g);
    CHECK((h - hr).norm() <= 1e-12 * h.norm());
    const auto losses = prediction_losses(truth, record_from_params(truth), 3, 1.0);
    CHECK(losses.los == 0.0);
    CHECK(losses.nlos == 0.0);
  }
}

TEST_CASE("reconstruction error shrinks with parameter noise") {
  const ArrayGeometry g;
  Rng rng(22);
  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
    double total = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      ChannelParams truth;
      truth.los = true;
      truth.los_path = {Complex{1.0, 0.3}, 12.0, 0.3, -0.2};
      truth.nlos.push_back({Complex{0.2, -0.1}, 18.0, -0.4, 0.05});
      PredictionRecord rec = record_from_params(truth);
      rec.azimuth += sigma * standard_normal(rng);
      rec.elevation += sigma * standard_normal(rng);
      rec.los_gain += sigma * complex_normal(rng);
      rec.nlos[0].path.gain += sigma * complex_normal(rng);
      total += std::pow(10.0, *nmse_db(compose_channel(truth, g), reconstruct_channel(rec, g)) / 10.0);
    }
    CHECK(total < prev);
    prev = total;
  }
}

TEST_CASE("regression loss") {
  const std::vector<double> zero{0.0, 1.0, -2.0};
  CHECK(regression_loss(zero, zero, 1.0) == 0.0);
  CHECK(regression_loss(std::vector<double>{2.0}, std::vector<double>{0.0}, 1.0) == 6.0);
  CHECK_THROWS(regression_loss(zero, std::vector<double>{1.0}, 1.0));

  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(9), b(9);
    for (auto& v : a) v = standard_normal(rng);
    for (auto& v : b) v = standard_normal(rng);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    double ab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += std::abs(a[i] - b[i]);
    CHECK(regression_loss(a, b, 1.0) == doctest::Approx(sq + ab));
  }
  CHECK_THROWS(flatten_nlos(std::vector<PathParams>(4), 3));
  CHECK(flatten_nlos(std::vector<PathParams>(1), 3).size() == 15);
}

TEST_CASE("NMSE anchors") {
  Rng rng(24);
  ChannelVector h(64);
  for (auto& v : h) v = complex_normal(rng);
  CHECK(nmse_db(h, h) == -std::numeric_limits<double>::infinity());
  CHECK(*nmse_db(h, ChannelVector::Zero(64)) == doctest::Approx(0.0));
  CHECK_FALSE(nmse_db(ChannelVector::Zero(64), h).has_value());

  ChannelVector e(64);
  for (auto& v : e) v = complex_normal(rng);
  e *= std::sqrt(0.1) * h.norm() / e.norm();
  CHECK(*nmse_db(h, h + e) == doctest::Approx(-10.0).epsilon(1e-9));
}

TEST_CASE("plausibility gate scales with range") {
  const PlausibilityGate g = plausibility_gate(5.0, 0.1, 960, 10.0);
  CHECK(g.meters == doctest::Approx(1.5));
  CHECK(g.pixels == doctest::Approx(144.0));
}
