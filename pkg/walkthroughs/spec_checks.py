"""Two cheap sanity checks on specifications: disproof and the leakage judge.

Run from the repository root:  python walkthroughs/spec_checks.py
Disproof needs z3 (or cvc5) on PATH.
"""

from __future__ import annotations

from pathlib import Path

from wyvc.analysis import bounded_disprove, check_imperativeness, make_disproof_goal, replay_disproof
from wyvc.syntax import expr_str, parse_method, parse_program

CORPUS = Path(__file__).resolve().parents[1] / "corpus"

SPECS = {
    "contradiction": "method c (x: Int) returns (r: Int) ensures r < 0 && r > 0 do return 0",
    "square root of 2": "method s (x: Int) returns (r: Int) requires x = 2 ensures r * r = x do return 1",
    "absolute value": (CORPUS / "valid/abs.wyv").read_text(),
}


def main() -> None:
    print("Disproof: find an input for which no output satisfies the postcondition.")
    for label, src in SPECS.items():
        m = parse_program(src).main if "method" in src.split("\n", 1)[-1] else parse_method(src)
        goal = make_disproof_goal(m)
        res = bounded_disprove(goal)
        replay = replay_disproof(goal, res) if res.disproved else None
        print(f"  {label:<18} {res.status:<13} witness={res.witness} replayed={replay}")
        print(f"  {'':<18} claim: {expr_str(goal.claim)}")

    print("\nLeakage judge on executable code:")
    for name in ("valid/sum.wyv", "leaky/sum_direct.wyv", "leaky/same_array.wyv"):
        v = check_imperativeness(parse_program((CORPUS / name).read_text()).main)
        rules = ", ".join(f"{x.rule} {x.excerpt!r} at {x.location}" for x in v.violations) or "clean"
        print(f"  {name:<22} {rules}")


if __name__ == "__main__":
    main()
