#include "arp/tracking.hpp"

#include <json.hpp>

#include <cmath>

#include "arp/kernels.hpp"

namespace arp::track {

TrackerKind tracker_from_string(const std::string& name) {
    if (name == "oracle") return TrackerKind::oracle;
    if (name == "correlation") return TrackerKind::correlation;
    fail("unknown tracker \"" + name + "\" (expected oracle or correlation)");
}

TrajectorySet track_grid(const std::vector<Frame>& video, int grid_m, TrackerKind tracker,
                         const std::vector<sim::WorldState>* states, const Config& cfg) {
    if (video.size() < 2) fail("track_grid: need at least 2 frames");
    if (grid_m < 2) fail("track_grid: grid_m must be >= 2");
    const int size = video[0].size;
    for (const Frame& f : video) {
        if (f.size != size) fail("track_grid: frames differ in shape");
    }

    std::vector<std::pair<double, double>> seeds;
    seeds.reserve(static_cast<size_t>(grid_m) * grid_m);
    for (int i = 0; i < grid_m; ++i) {
        for (int j = 0; j < grid_m; ++j) {
            const double x = (j + 0.5) * size / grid_m - 0.5;
            const double y = (i + 0.5) * size / grid_m - 0.5;
            seeds.emplace_back(std::clamp(x, 0.0, size - 1.0), std::clamp(y, 0.0, size - 1.0));
        }
    }

    TrajectorySet ts;
    ts.grid_m = grid_m;
    ts.trajectories.resize(seeds.size());

    if (tracker == TrackerKind::oracle) {
        if (states == nullptr || states->size() != video.size()) {
            fail("track_grid: oracle tracker requested without simulator states");
        }
        for (size_t i = 0; i < seeds.size(); ++i) {
            ts.trajectories[i].points =
                sim::oracle_correspondence(*states, seeds[i].first, seeds[i].second, cfg);
        }
        return ts;
    }

    // correlation tracker, frame to frame
    std::vector<double> cur(seeds.size() * 2), next(seeds.size() * 2);
    for (size_t i = 0; i < seeds.size(); ++i) {
        cur[2 * i] = seeds[i].first;
        cur[2 * i + 1] = seeds[i].second;
        ts.trajectories[i].points.emplace_back(seeds[i]);
    }
    for (size_t h = 0; h + 1 < video.size(); ++h) {
        ops::track_points_step(video[h].px.data(), video[h + 1].px.data(), size, cur.data(),
                               static_cast<int>(seeds.size()), kPatchRadius, kSearchRadius,
                               next.data());
        cur = next;
        for (size_t i = 0; i < seeds.size(); ++i) {
            ts.trajectories[i].points.emplace_back(cur[2 * i], cur[2 * i + 1]);
        }
    }
    return ts;
}

double displacement(const PointTrajectory& p, int h) {
    if (h < 1 || h >= static_cast<int>(p.points.size())) {
        fail("displacement: step index out of range: " + std::to_string(h));
    }
    const double dx = p.points[h].first - p.points[h - 1].first;
    const double dy = p.points[h].second - p.points[h - 1].second;
    return std::sqrt(dx * dx + dy * dy);
}

double mean_displacement(const PointTrajectory& p) {
    const int h_steps = static_cast<int>(p.points.size()) - 1;
    if (h_steps < 1) fail("mean_displacement: trajectory needs at least 2 points");
    double sum = 0.0;
    for (int h = 1; h <= h_steps; ++h) sum += displacement(p, h);
    return sum / h_steps;
}

std::vector<int> select_moving_indices(const TrajectorySet& ts, double tau) {
    if (!(tau > 0.0)) fail("select_moving: tau must be > 0");
    std::vector<int> idx;
    for (size_t i = 0; i < ts.trajectories.size(); ++i) {
        if (mean_displacement(ts.trajectories[i]) > tau) idx.push_back(static_cast<int>(i));
    }
    return idx;
}

TrajectorySet select_moving(const TrajectorySet& ts, double tau) {
    TrajectorySet out;
    out.grid_m = ts.grid_m;
    for (int i : select_moving_indices(ts, tau)) out.trajectories.push_back(ts.trajectories[i]);
    return out;
}

std::vector<std::pair<double, double>> initial_coordinates(const TrajectorySet& pm) {
    std::vector<std::pair<double, double>> out;
    out.reserve(pm.trajectories.size());
    for (const auto& p : pm.trajectories) {
        if (p.points.empty()) fail("initial_coordinates: empty trajectory");
        out.push_back(p.points[0]);
    }
    return out;
}

std::string trajectory_document(const TrajectorySet& ts, double tau, const std::string& tracker) {
    nlohmann::json doc;
    doc["grid_m"] = ts.grid_m;
    doc["tau"] = tau;
    doc["tracker"] = tracker;
    doc["trajectories"] = nlohmann::json::array();
    for (const auto& p : ts.trajectories) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& [x, y] : p.points) pts.push_back({x, y});
        doc["trajectories"].push_back(std::move(pts));
    }
    doc["selected"] = select_moving_indices(ts, tau);
    return doc.dump();
}

} // namespace arp::track
