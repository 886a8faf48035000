"""Longest runs of equal divisor counts below a bound, next to the proven bounds."""

import sys

from equidiv.bounds import rule_bound
from equidiv.scan import longest_runs

hi = int(sys.argv[1]) if len(sys.argv) > 1 else 10**6

best = longest_runs(1, hi, max_k=48)
print(f"longest runs below {hi:,}")
print(f"{'k':>4} {'length':>6} {'bound':>5}  start")
for k, rec in best.items():
    if k % 2 == 0:
        print(f"{k:>4} {rec.length:>6} {rule_bound(k).upper:>5}  {rec.start}")
