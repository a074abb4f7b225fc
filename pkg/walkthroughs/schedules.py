"""How the iterative-deepening schedule trades latency for compute.

Run from the repository root:  python walkthroughs/schedules.py
"""

from __future__ import annotations

import math

from wyvc.schedule import IterativeDeepening, Parallel, Sequential, expected_compute, expected_latency, simulate


def main() -> None:
    schedules = [Sequential(), Parallel(16), IterativeDeepening((1, 1, 2, 4))]
    print(f"{'k':>4} {'schedule':<8} {'E[compute]':>11} {'sim':>8} {'E[latency]':>11} {'sim':>8}")
    for k in (4, 16, 64):
        p = 1 / k
        for s in schedules:
            sim = simulate(s, p, goals=5000, seed=1)
            print(f"{k:>4} {s.label():<8} {expected_compute(s, p):>11.2f} {sim.mean_compute:>8.2f} "
                  f"{expected_latency(s, p):>11.2f} {sim.mean_latency:>8.2f}")

    # Doubling stages: latency grows with log k while compute stays near k.
    id4 = expected_latency(IterativeDeepening(), 1 / 4)
    id64 = expected_latency(IterativeDeepening(), 1 / 64)
    print(f"\nlatency ratio k=64 vs k=4: {id64 / id4:.2f} (log ratio {math.log(64) / math.log(4):.0f})")


if __name__ == "__main__":
    main()
