// Heat flow on a 1D grid: the decay rate of the discrete flow is the first Laplacian eigenvalue.
#include <cstdio>

#include "nashflow/nashflow.hpp"

int main() {
  using namespace nashflow;

  const Grid grid(1, 64);
  const PdeGame game = discretize_l2_game(grid, CouplingSpec{{quadratic_kernel(1)}, no_coupling(1), {}});
  Xorshift64Star rng(1);

  FlowConfig cfg;
  cfg.h = game.default_step();
  cfg.t_max = 2.0;
  cfg.residual_tol = 1e-14;
  cfg.record_every = 200;
  const FlowTrajectory traj = integrate(game.problem, game.point(rng.normal_vector(grid.size())), cfg);
  const double rate = fit_decay_rate(traj, Vector::Zero(grid.size()), grid, GridNorm::L2);
  std::printf("fitted rate %.5f, lambda1 %.5f\n", rate, grid.lambda1());
  return 0;
}
