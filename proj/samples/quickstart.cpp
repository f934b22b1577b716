// Solve the two-player quadratic game and the rotation game from the command line defaults.
#include <cstdio>

#include "nashflow/nashflow.hpp"

int main() {
  using namespace nashflow;

  const GameProblem quad = quadratic_two_player();
  FlowConfig cfg;
  cfg.t_max = 30.0;
  const SolveResult r = solve(quad, GamePoint::zeros(quad.layout()), cfg);
  std::printf("%s: x = (%.6f, %.6f), residual %.2e, %s\n", quad.name.c_str(), r.equilibrium.data()[0],
              r.equilibrium.data()[1], r.certificate, to_string(r.mode));

  // The rotation flow circles forever; only its time average converges.
  const GameProblem rot = rotation_game();
  cfg.t_max = 200.0;
  cfg.h = 1e-3;
  const FlowTrajectory traj = integrate(rot, GamePoint(Vector{{0.6, 0.0}}, rot.layout()), cfg);
  std::printf("%s: |u(T)| = %.4f, |mean| = %.2e\n", rot.name.c_str(), traj.states.back().norm(),
              traj.cesaro.data().norm());
  return 0;
}
