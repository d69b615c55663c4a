"""Exhaustive verification of the separation-optimality claim.

On tiny instances we can enumerate every input map (assignments of the
training points to a finite code grid) and every linear readout on a
weight lattice.  The claim: input maps whose inter-class feature
distances all reach the grid-wide maximum attain the family-wide risk
minimum after optimizing the readout.
"""

from modkernel.geometry import committed_bruteforce_instances

for name, build in committed_bruteforce_instances().items():
    report = build()
    status = "pass" if report.passed else "FAIL"
    print(f"{status}  {name}")
    print(f"      {report.assignments} input maps enumerated, "
          f"{report.satisfying} satisfy the separation condition")
    print(f"      family-wide min risk {report.global_min:.6f}, "
          f"min over satisfying {report.min_over_satisfying:.6f}, "
          f"{len(report.counterexamples)} counterexamples")
