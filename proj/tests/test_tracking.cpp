#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arp/rng.hpp"
#include "arp/sim.hpp"
#include "arp/tracking.hpp"

using namespace arp;
using namespace arp::track;

namespace {

Config cfg64() {
    Config cfg;
    validate_config(cfg);
    return cfg;
}

PointTrajectory traj(std::initializer_list<std::pair<double, double>> pts) {
    PointTrajectory p;
    p.points.assign(pts);
    return p;
}

// independent recomputation of the moving-point selection, written only from
// the displacement definitions
std::vector<int> brute_force_select(const TrajectorySet& ts, double tau) {
    std::vector<int> out;
    for (size_t i = 0; i < ts.trajectories.size(); ++i) {
        const auto& pts = ts.trajectories[i].points;
        double sum = 0.0;
        for (size_t h = 1; h < pts.size(); ++h) {
            const double dx = pts[h].first - pts[h - 1].first;
            const double dy = pts[h].second - pts[h - 1].second;
            sum += std::sqrt(dx * dx + dy * dy);
        }
        const double mean = sum / static_cast<double>(pts.size() - 1);
        if (mean > tau) out.push_back(static_cast<int>(i));
    }
    return out;
}

TrajectorySet random_set(Rng& rng, int n_traj, int h_plus_1, bool with_boundary, double tau) {
    TrajectorySet ts;
    ts.grid_m = 0;
    for (int i = 0; i < n_traj; ++i) {
        PointTrajectory p;
        if (with_boundary && i % 5 == 0) {
            // constant per-step displacement exactly tau: mean lands exactly
            // on the threshold and must be excluded by the strict comparison
            double x = rng.uniform(0, 10);
            for (int h = 0; h < h_plus_1; ++h) p.points.emplace_back(x + h * tau, 3.0);
        } else {
            double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
            for (int h = 0; h < h_plus_1; ++h) {
                p.points.emplace_back(x, y);
                x += rng.uniform(-3, 3);
                y += rng.uniform(-3, 3);
            }
        }
        ts.trajectories.push_back(std::move(p));
    }
    return ts;
}

} // namespace

TEST_CASE("displacement: 3-4-5 triangle, identity, axis-aligned") {
    const auto p = traj({{0, 0}, {3, 4}, {3, 4}, {3, 6}});
    CHECK(displacement(p, 1) == doctest::Approx(5.0));
    CHECK(displacement(p, 2) == doctest::Approx(0.0));
    CHECK(displacement(p, 3) == doctest::Approx(2.0));
    CHECK_THROWS_AS(displacement(p, 0), error);
    CHECK_THROWS_AS(displacement(p, 4), error);
}

TEST_CASE("mean_displacement: arithmetic, identity, constant motion") {
    // displacements (5,0,0,0,0,0) over H=6
    const auto p1 = traj({{0, 0}, {3, 4}, {3, 4}, {3, 4}, {3, 4}, {3, 4}, {3, 4}});
    CHECK(mean_displacement(p1) == doctest::Approx(5.0 / 6.0));
    const auto p2 = traj({{7, 7}, {7, 7}, {7, 7}});
    CHECK(mean_displacement(p2) == doctest::Approx(0.0));
    const auto p3 = traj({{0, 0}, {2, 0}, {4, 0}, {6, 0}});
    CHECK(mean_displacement(p3) == doctest::Approx(2.0));
}

TEST_CASE("select_moving: strict threshold") {
    TrajectorySet ts;
    ts.grid_m = 0;
    // mean exactly 2.0
    ts.trajectories.push_back(traj({{0, 0}, {2, 0}, {4, 0}, {6, 0}, {8, 0}, {10, 0}, {12, 0}}));
    // mean 2.5
    ts.trajectories.push_back(
        traj({{0, 0}, {2.5, 0}, {5, 0}, {7.5, 0}, {10, 0}, {12.5, 0}, {15, 0}}));
    // static
    ts.trajectories.push_back(traj({{5, 5}, {5, 5}, {5, 5}, {5, 5}, {5, 5}, {5, 5}, {5, 5}}));
    const auto sel = select_moving(ts, 2.0);
    REQUIRE(sel.trajectories.size() == 1);
    CHECK(sel.trajectories[0].points[1].first == doctest::Approx(2.5));
    CHECK(select_moving_indices(ts, 2.0) == std::vector<int>{1});

    TrajectorySet all_static;
    all_static.trajectories.assign(4, ts.trajectories[2]);
    CHECK(select_moving(all_static, 2.0).trajectories.empty());
}

TEST_CASE("initial_coordinates: order preserving") {
    TrajectorySet ts;
    CHECK(initial_coordinates(ts).empty());
    ts.trajectories.push_back(traj({{10, 20}, {11, 21}}));
    ts.trajectories.push_back(traj({{1, 2}, {3, 4}}));
    const auto pts = initial_coordinates(ts);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].first == doctest::Approx(10));
    CHECK(pts[0].second == doctest::Approx(20));
    CHECK(pts[1].first == doctest::Approx(1));
}

TEST_CASE("track_grid: grid_M=24 yields 576 trajectories") {
    const Config cfg = cfg64();
    sim::WorldState state;
    state.arm = sim::ArmState{sim::kArmHomeX, sim::kArmHomeY, -1};
    const Frame f = sim::render(state, cfg);
    const std::vector<Frame> video = {f, f, f};
    const auto ts = track_grid(video, 24, TrackerKind::correlation, nullptr, cfg);
    CHECK(ts.trajectories.size() == 576);
    for (const auto& p : ts.trajectories) CHECK(p.points.size() == 3);
}

TEST_CASE("track_grid: static video gives constant correlation trajectories") {
    const Config cfg = cfg64();
    auto [state, task] = sim::reset(11, 0, cfg);
    (void)task;
    const Frame f = sim::render(state, cfg);
    const std::vector<Frame> video(4, f);
    const auto ts = track_grid(video, 12, TrackerKind::correlation, nullptr, cfg);
    for (const auto& p : ts.trajectories) {
        CHECK(mean_displacement(p) == doctest::Approx(0.0));
    }
}

TEST_CASE("track_grid: oracle tracker requires states") {
    const Config cfg = cfg64();
    sim::WorldState state;
    const Frame f = sim::render(state, cfg);
    const std::vector<Frame> video = {f, f};
    CHECK_THROWS_AS(track_grid(video, 8, TrackerKind::oracle, nullptr, cfg), error);
}

TEST_CASE("track_grid: oracle follows a block translating 3 px per frame") {
    const Config cfg = cfg64();
    const double step_ws = 3.0 * 2.0 / cfg.image_size;
    sim::WorldState s;
    s.arm = sim::ArmState{sim::kArmHomeX, sim::kArmHomeY, -1};
    sim::Obj o;
    o.id = 0;
    o.shape = sim::ObjShape::block;
    o.color = 2;
    o.cx = -0.4;
    o.cy = 0.0;
    o.half = 0.18;
    s.objects.push_back(o);

    std::vector<sim::WorldState> states = {s};
    std::vector<Frame> video = {sim::render(s, cfg)};
    for (int h = 0; h < 4; ++h) {
        sim::WorldState nxt = states.back();
        nxt.objects[0].cx += step_ws;
        states.push_back(nxt);
        video.push_back(sim::render(nxt, cfg));
    }
    const auto ts = track_grid(video, 24, TrackerKind::oracle, &states, cfg);
    bool found_on_block = false;
    for (const auto& p : ts.trajectories) {
        const double px = p.points[0].first, py = p.points[0].second;
        const double wx = sim::pixel_to_workspace(0, cfg.image_size) + px * 2.0 / cfg.image_size;
        const double wy = sim::pixel_to_workspace(0, cfg.image_size) + py * 2.0 / cfg.image_size;
        if (sim::object_contains(o, wx, wy)) {
            found_on_block = true;
            for (int h = 1; h < 5; ++h) CHECK(displacement(p, h) == doctest::Approx(3.0));
        }
    }
    CHECK(found_on_block);
}

TEST_CASE("correlation endpoint error <= 1 px vs oracle for in-window translation") {
    const Config cfg = cfg64();
    const double step_ws = 6.0 * 2.0 / cfg.image_size; // 6 px per frame, inside search window
    sim::WorldState s;
    s.arm = sim::ArmState{sim::kArmHomeX, sim::kArmHomeY, -1};
    sim::Obj o;
    o.id = 0;
    o.shape = sim::ObjShape::block;
    o.color = 0;
    o.cx = -0.5;
    o.cy = -0.2;
    o.half = 0.28;
    s.objects.push_back(o);

    std::vector<sim::WorldState> states = {s};
    std::vector<Frame> video = {sim::render(s, cfg)};
    for (int h = 0; h < 5; ++h) {
        sim::WorldState nxt = states.back();
        nxt.objects[0].cx += step_ws;
        states.push_back(nxt);
        video.push_back(sim::render(nxt, cfg));
    }
    const auto oracle = track_grid(video, 24, TrackerKind::oracle, &states, cfg);
    const auto corr = track_grid(video, 24, TrackerKind::correlation, nullptr, cfg);
    // points whose whole patch lies on the object; boundary patches mix in
    // table pixels and carry no tracking guarantee
    const double margin_ws = (kPatchRadius + 1) * 2.0 / cfg.image_size;
    int on_block = 0;
    for (size_t i = 0; i < oracle.trajectories.size(); ++i) {
        const auto& [px, py] = oracle.trajectories[i].points[0];
        const double wx = sim::pixel_to_workspace(0, cfg.image_size) + px * 2.0 / cfg.image_size;
        const double wy = sim::pixel_to_workspace(0, cfg.image_size) + py * 2.0 / cfg.image_size;
        if (std::abs(wx - o.cx) > o.half - margin_ws || std::abs(wy - o.cy) > o.half - margin_ws) {
            continue;
        }
        ++on_block;
        const auto& end_o = oracle.trajectories[i].points.back();
        const auto& end_c = corr.trajectories[i].points.back();
        const double err = std::hypot(end_o.first - end_c.first, end_o.second - end_c.second);
        CHECK(err <= 1.0);
    }
    CHECK(on_block >= 10);
}

TEST_CASE("property: translation invariance and scale equivariance") {
    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        PointTrajectory p;
        double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
        for (int h = 0; h < 7; ++h) {
            p.points.emplace_back(x, y);
            x += rng.uniform(-4, 4);
            y += rng.uniform(-4, 4);
        }
        PointTrajectory shifted = p, scaled = p;
        const double tx = rng.uniform(-10, 10), ty = rng.uniform(-10, 10);
        const double sc = rng.uniform(0.5, 3.0);
        for (auto& [a, b] : shifted.points) {
            a += tx;
            b += ty;
        }
        for (auto& [a, b] : scaled.points) {
            a *= sc;
            b *= sc;
        }
        CHECK(mean_displacement(shifted) == doctest::Approx(mean_displacement(p)).epsilon(1e-12));
        CHECK(mean_displacement(scaled) == doctest::Approx(sc * mean_displacement(p)).epsilon(1e-9));
        for (int h = 1; h < 7; ++h) {
            CHECK(displacement(shifted, h) == doctest::Approx(displacement(p, h)).epsilon(1e-12));
            CHECK(displacement(scaled, h) ==
                  doctest::Approx(sc * displacement(p, h)).epsilon(1e-9));
        }
    }
}

TEST_CASE("property: threshold monotonicity") {
    Rng rng(22);
    const auto ts = random_set(rng, 60, 7, false, 2.0);
    const auto low = select_moving_indices(ts, 1.0);
    const auto high = select_moving_indices(ts, 2.5);
    for (int i : high) {
        CHECK(std::find(low.begin(), low.end(), i) != low.end());
    }
    CHECK(high.size() <= low.size());
}

TEST_CASE("property: agrees with brute-force recomputation, boundary included") {
    Rng rng(23);
    const double tau = 2.0;
    for (int rep = 0; rep < 50; ++rep) {
        const auto ts = random_set(rng, 40, 7, true, tau);
        CHECK(select_moving_indices(ts, tau) == brute_force_select(ts, tau));
    }
}

TEST_CASE("trajectory document lists selection") {
    const Config cfg = cfg64();
    sim::WorldState state;
    state.arm = sim::ArmState{sim::kArmHomeX, sim::kArmHomeY, -1};
    const Frame f = sim::render(state, cfg);
    const auto ts = track_grid({f, f}, 4, TrackerKind::correlation, nullptr, cfg);
    const std::string doc = trajectory_document(ts, 2.0, "correlation");
    CHECK(doc.find("\"grid_m\":4") != std::string::npos);
    CHECK(doc.find("\"selected\":[]") != std::string::npos);
}
