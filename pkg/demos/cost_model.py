"""Interaction cost of reaching accuracy eps with ensemble estimators.

Simulating one N-particle system costs N^2 pairwise interactions per
step.  A single large system needs N ~ eps^-2 to push its 1/N bias below
eps, i.e. cost eps^-4.  An ensemble of M independent order-k Romberg
stacks instead takes N ~ eps^(-1/k) and M ~ eps^(-2 + 1/k), with total
cost M * sum_m (mN)^2 -- asymptotically far cheaper as k grows.
"""

from chaoscale import cost_plan

print(f"{'eps':>8} {'k':>3} {'N':>7} {'M':>9} {'cost':>14} {'single-system':>14}")
for eps in (0.1, 0.03, 0.01, 0.003):
    for k in (1, 2, 3):
        plan = cost_plan(eps, k)
        print(f"{eps:>8} {k:>3} {plan.n:>7} {plan.m:>9} "
              f"{plan.interactions:>14} {plan.interactions_single:>14}")
    print()

plan = cost_plan(0.1, 1)
print(f"reference point: eps = 0.1, k = 1 gives cost {plan.interactions} "
      f"against {plan.interactions_single} for one big system")
