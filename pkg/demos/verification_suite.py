# The self-verification battery, run programmatically. Each suite
# hammers one contract with randomized probes and returns a SuiteResult
# with check counts, timings, and a details dict; the CLI equivalent is
# `icbpg verify --quick`.
from icbpg import verify

suites = [
    verify.certificate_equivalence(instances=150),
    verify.lipschitz_continuity(probes=150),
    verify.rockafellar_inclusion(probes=150),
    verify.gradient_embedding(probes=150),
    verify.subsolver_invariants(probes=60),
    verify.exact_prox_consistency(blocks=30),
    verify.oracle_equivalence(cycles=40),
    verify.lemma_grid(horizon=1500),
]

print("%-26s %7s %7s %8s" % ("suite", "checks", "failed", "seconds"))
for res in suites:
    print("%-26s %7d %7d %8.2f" % (res.name, res.checks, res.failed,
                                   res.seconds))
    assert res.passed, res.failures[:3]

# A few of the measured quantities behind the pass lines.
oracle = suites[6]
print("\nsingle-block run vs independent solver: trajectory diff %.2e,"
      " fixed point diff %.2e" % (oracle.details["trajectory_max_diff"],
                                  oracle.details["fixed_point_diff"]))
grid = suites[7]
print("grid cells needing the floor-completed bound: %s"
      % ", ".join(grid.details["floored_cells"]))
