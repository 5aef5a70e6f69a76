#pragma once

#include <functional>
#include <vector>

#include "mapprior/grid.hpp"
#include "mapprior/occupancy_map.hpp"
#include "mapprior/trajectory.hpp"

namespace mapprior {

/// Raw free-space overlap of the (noisy) window kernel at every end cell.
Grid<double> heuristic_prior(const OccupancyMap& map, const TrajectoryWindow& window);

inline constexpr double kPdrStepLength = 0.67;

/// Dead reckoning from step events: each step advances `step_length` along
/// its heading. Returns the start pose followed by one pose per step.
Trajectory pdr(const StepEvents& steps, const Pose& start, double step_length = kPdrStepLength);

struct LocationGraph {
  double edge_length = 1.0;
  std::vector<Point2> nodes;
  std::vector<std::vector<int>> neighbors;  // sorted, self excluded

  std::size_t edge_count() const;
};

/// Free lattice points at `edge_length` spacing, 8-neighbour edges within
/// 1.5 * edge_length that do not cross occupied cells; only the largest
/// connected component is kept. Throws std::invalid_argument if edge_length
/// is below the map resolution or no node is free.
LocationGraph build_graph(const OccupancyMap& map, double edge_length);

struct CrfParams {
  double unary_weight = 1.0;
  double pairwise_weight = 1.0;
  double edge_length = 1.0;
};

/// Linear-chain MAP problem over `nodes` states and `steps` time steps. A
/// transition i -> j is allowed when i == j or i is in predecessors[j].
struct ChainProblem {
  int steps = 0;
  int nodes = 0;
  std::function<double(int t, int i)> unary;
  std::function<double(int t, int from, int to)> pairwise;  // t >= 1
  const std::vector<std::vector<int>>* predecessors = nullptr;
};

/// Exact maximizer of sum_t unary + sum_{t>=1} pairwise. Ties go to the lowest
/// node index.
std::vector<int> viterbi(const ChainProblem& problem);

/// Map matching: unary -w_u * |node - dead_reckoned_t|^2, pairwise
/// -w_p * |(node_t - node_{t-1}) - odom_t|^2, solved with Viterbi.
/// Throws std::invalid_argument when no graph node lies near the start.
Trajectory crf_match(const LocationGraph& graph, const OdometryStream& odom, const Pose& start,
                     const CrfParams& params);

struct CrfValidationRun {
  OdometryStream odom;
  Trajectory truth;
};

/// Grid search over weights {0.1, 1, 10}^2 and edge lengths {0.5, 1, 2} m by
/// mean ATE on the validation runs.
CrfParams grid_search_crf(const OccupancyMap& map, const std::vector<CrfValidationRun>& runs);

}  // namespace mapprior
