#pragma once

#include <string>
#include <utility>
#include <vector>

#include "arp/config.hpp"
#include "arp/sim.hpp"
#include "arp/types.hpp"

namespace arp::track {

// One tracked point's pixel location across H+1 frames.
struct PointTrajectory {
    std::vector<std::pair<double, double>> points;
};

struct TrajectorySet {
    std::vector<PointTrajectory> trajectories;
    int grid_m = 0;
};

enum class TrackerKind { oracle, correlation };

TrackerKind tracker_from_string(const std::string& name);

// correlation matcher parameters (patch SSD, ties to smallest displacement)
inline constexpr int kPatchRadius = 3;
inline constexpr int kSearchRadius = 8;

// Seeds grid_m^2 points at grid-cell centres of frame 0 and tracks them
// through the video. The oracle tracker needs the simulator states that
// rendered the video and throws when they are absent.
TrajectorySet track_grid(const std::vector<Frame>& video, int grid_m, TrackerKind tracker,
                         const std::vector<sim::WorldState>* states, const Config& cfg);

// ||p_h - p_{h-1}||_2 for 1 <= h <= H
double displacement(const PointTrajectory& p, int h);

// mean of the H per-step displacements
double mean_displacement(const PointTrajectory& p);

// keeps trajectories with mean displacement strictly greater than tau
TrajectorySet select_moving(const TrajectorySet& ts, double tau);
std::vector<int> select_moving_indices(const TrajectorySet& ts, double tau);

// t=0 point of each trajectory, order preserving
std::vector<std::pair<double, double>> initial_coordinates(const TrajectorySet& pm);

// JSON trajectory document emitted by the track subcommand
std::string trajectory_document(const TrajectorySet& ts, double tau, const std::string& tracker);

} // namespace arp::track
