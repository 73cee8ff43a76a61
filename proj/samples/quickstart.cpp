// Train on two moons, prune with and without the plausibility region, evaluate on held-out data.

#include <cstdio>

#include <pine.hpp>

int main() {
  using namespace pine;
  const auto parts = split(gen_moons({400, 0.2, 0}), {{0.64, 0.16, 0.20}, 0});
  const Dataset &fit = parts[0], &cal = parts[1], &test = parts[2];
  const Ensemble model = train_boosted(fit, TrainParams{});

  PineConfig cfg;
  cfg.alpha = 0.8;
  const PruneResult fipe = run_fipe(model, fit, cfg);
  const PruneResult pruned = run(model, fit, cal, cfg);

  for (const PruneResult* r : {&fipe, &pruned}) {
    const EvalReport rep = evaluate(model, r->original_weights, r->weights, test, r->region());
    std::printf("%-10s kept %zu of %zu, certified %s, fidelity %.4f, coverage %.4f\n", r->fipe ? "full-space" : "alpha 0.8",
                rep.kept, rep.n_trees, r->certified ? "yes" : "no", rep.fidelity, rep.coverage);
  }
  return 0;
}
