"""Measure the constants of the Bernstein-type inequalities on a random ensemble.

Run: python3 demos/ensemble_inequalities.py
"""
from frac_boussinesq import harness as H

ens = H.EnsembleSpec(count=16, seed=0, n=128)
blocks = range(2, 6)

rep = H.check_bernstein_sandwich(ens, blocks)
print(f"Bernstein sandwich: largest constant {rep.stat('C'):.3f} (threshold 10) -> {rep.status}")

for alpha in (1.1, 1.5, 2.0):
    rep = H.check_generalized_bernstein(ens, alpha, 2.0, blocks)
    print(f"fractional Bernstein p=2, alpha={alpha}: min ratio {rep.stat('ratio', 'min'):.3f}"
          f" vs analytic floor {0.75**alpha:.3f}")
for p in (1.5, 3.0):
    rep = H.check_generalized_bernstein(ens, 1.5, p, blocks)
    print(f"fractional Bernstein p={p}, alpha=1.5: min ratio {rep.stat('ratio', 'min'):.3f}")

for alpha in (0.5, 1.0):
    rep = H.check_positivity_corollary(ens, alpha, 3.0)
    print(f"positivity p=3, alpha={alpha}: smallest relative margin {rep.stat('margin', 'min'):.3f}")

rep = H.check_semigroup_decay(ens, 1.5, 4.0, blocks)
print(f"heat semigroup on blocks, p=4: rate / 2^(j alpha) in "
      f"[{rep.stat('rate_ratio', 'min'):.3f}, {rep.stat('rate_ratio'):.3f}]")
