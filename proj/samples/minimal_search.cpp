// Runs a short single-loop search over the default space with the surrogate
// evaluator and prints the resulting front.

#include <iostream>

#include "cellspace/cellspace.hpp"

int main() {
  auto cfg = cellspace::default_config();
  cfg.ea.population = 12;
  cfg.ea.generations = 10;
  cfg.ea.seed = 7;

  cellspace::SurrogateEvaluator evaluator;
  const auto result = cellspace::run_search(cfg, evaluator, [](const cellspace::GenerationStats& st) {
    std::cout << "gen " << st.gen << "  hv " << st.hypervolume << "  archive " << st.archive_size
              << '\n';
  });

  std::cout << "\nfront (" << result.evaluations << " evaluations):\n";
  for (const auto& e : result.archive.sorted())
    std::cout << "  f1=" << e.objectives.f1 << "  f2=" << e.objectives.f2
              << "  params=" << e.param_count << '\n';
}
