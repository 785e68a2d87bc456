// Trains a small network on the 1D problem and prints its error bound.
//
//   blowup_pinn_sample [delta] [iterations]

#include <cstdlib>
#include <iostream>

#include "blowup_pinn/bounds.hpp"
#include "blowup_pinn/optimizer.hpp"
#include "blowup_pinn/sampling.hpp"

namespace bp = blowup_pinn;

int main(int argc, char** argv) {
  const double delta = argc > 1 ? std::atof(argv[1]) : 0.5;
  const long iterations = argc > 2 ? std::atol(argv[2]) : 2000;

  const bp::Burgers1D problem(delta);
  const auto set = bp::sample_collocation(problem, {1024, 128, 128}, bp::Scheme::random, 0);

  bp::TrainConfig config;
  config.width = 20;
  config.depth = 4;
  config.iterations = iterations;
  config.lr = 1e-3;
  const bp::TrainResult result = bp::train(problem, set, config);
  std::cout << "initial loss " << result.initial_loss << ", best loss " << result.best.loss << " at iteration "
            << result.best.iteration << " (" << result.train_seconds << " s)\n";

  const bp::NetworkSurrogate surrogate(result.best.params);
  const auto report = bp::theorem2_bound(problem, surrogate, bp::default_grids(problem));
  bp::write_report_text(report, "generalization bound", std::cout);
  return report.rhs >= report.lhs ? 0 : 1;
}
