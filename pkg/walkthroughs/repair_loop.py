"""Repairing a too-weak loop invariant with scripted provers.

Run from the repository root:  python walkthroughs/repair_loop.py
Needs z3 (or cvc5) on PATH.
"""

from __future__ import annotations

from pathlib import Path

from wyvc.agents import scripted_agent
from wyvc.orchestrator import run_decomposition
from wyvc.schedule import Parallel
from wyvc.smt import check_obligation
from wyvc.syntax import expr_str, parse_program, pretty_print
from wyvc.vcgen import generate_obligations

CORPUS = Path(__file__).resolve().parents[1] / "corpus"


def show_obligations(method) -> None:
    for ob in generate_obligations(method):
        v = check_obligation(ob, timeout_ms=10_000)
        extra = f"  model={v.model.to_json()}" if v.model else ""
        print(f"  {ob.name:<14} {ob.tier.value:<10} {v.kind}{extra}")


def main() -> None:
    weak = parse_program((CORPUS / "scenarios/sum_weak.wyv").read_text()).main
    print("Invariant only relates s to a prefix sum; nothing bounds i:")
    print("  ", expr_str(weak.body.stmts[2].invariants[0][1]))
    show_obligations(weak)

    # Three scripted provers per stage. On h.loop they fail twice, then ask
    # for a bound on i; after the edit every obligation goes through.
    agent = scripted_agent(CORPUS / "fixtures/fig1.json")
    result = run_decomposition([agent], weak, budget=64, schedule=Parallel(3), timeout_ms=10_000)

    print(f"\n{result.status} after {result.iterations} iterations; {result.summary()}")
    for entry in result.history:
        print("  applied:", entry.get("applied"), "reused:", entry.get("reused"))
    print("\nFinal method:\n")
    print(pretty_print(result.method))
    print("\nTrace:")
    for e in result.trace.events:
        print(f"  it={e.iteration} stage={e.stage} {e.goal:<13} {e.agent:<8} {e.kind:<6} {e.outcome}")


if __name__ == "__main__":
    main()
