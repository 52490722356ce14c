// Evaluates two five-module structures, searches for the best one and flies it.
#include <iostream>

#include "modstruct/ga.hpp"
#include "modstruct/io.hpp"
#include "modstruct/sim.hpp"

using namespace modstruct;

int main() {
  const Roster roster = identical_roster(5, 1.0, 0.1);

  Aim plus(5);
  for (int f = 0; f < kFaces; ++f) plus.dock({1, f}, {f + 2, opposite_face(f)});
  Aim chain(5);
  for (int i = 1; i < 5; ++i) chain.dock({i, 0}, {i + 1, 2});

  std::cout << "plus  fitness " << fitness(pos_tree_search(plus, roster, 1.0)).value << "\n";
  std::cout << "chain fitness " << fitness(pos_tree_search(chain, roster, 1.0)).value << "\n";

  GaParams ga;
  ga.pop_size = 200;
  const GaResult res = evolve(EvalContext{roster, 1.0, {}}, ga);
  std::cout << "GA best after " << res.trace.generations.size() - 1 << " generations: " << res.best.fitness.value
            << "\n"
            << aim_to_string(res.best.aim, 1.0);

  SimConfig sim;
  sim.trajectory.attitude_amplitude = Eigen::Vector3d(0.3, 0.3, 0.5);
  sim.trajectory.attitude_frequency = Eigen::Vector3d::Constant(0.2);
  const SimResult flight = track(pos_tree_search(res.best.aim, roster, 1.0), sim);
  std::cout << "tracking: pos_rms " << flight.pos_rms << " m, att_rms " << flight.att_rms << " rad\n";
}
