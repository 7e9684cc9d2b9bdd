#!/usr/bin/env python3
"""Smoke test for the kduel_py extension module.

Builds nothing itself: run `cargo build -p kduel-py` first, then
`python3 python/smoke_test.py`. The script copies the cdylib next to a
temp directory under an importable name and drives the whole surface.
"""

import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent

WORKED_TRACE = """\
step 1 prog 00 out e cost 0
step 2 prog 01 out 0 cost 1
step 3 prog 10 out 1 cost 2
step 4 prog 110 out 11 cost 5
"""

FLIP_REF = "query x=01 k=3\n  yes:\n    out 1\n  no:\n    out 0\n"
BOBWIN_GAME = (
    "target 1\nbudget alice=0 bob=2\nreferee flip.ref\n"
    "init x=01 c=5\nprice x=01 q=3 b=2\n"
)

FIGHTER_REF = "query x=0110 k=7\n  yes:\n    out 1\n  no:\n    out 0\n"
FIGHTER_CFG = "tower scaled 1 2 3 8\nd 2\nreferee 1 one.ref\ndelta fixed lstar=0 tq=0 tn=0\n"
FIGHTER_EVENTS = "step 1 x 11 q 3\nstep 2 x 0110 q 5\nstep 3 x 0110 q 4\n"


def import_module(tmp: Path):
    candidates = [
        REPO / "target" / "debug" / "libkduel_py.so",
        REPO / "target" / "release" / "libkduel_py.so",
        REPO / "target" / "debug" / "libkduel_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no built extension found; run `cargo build -p kduel-py` first")
    shutil.copy(built, tmp / "kduel_py.so")
    sys.path.insert(0, str(tmp))
    import kduel_py

    return kduel_py


def check(name, got, want):
    assert got == want, f"{name}: got {got!r}, want {want!r}"
    print(f"ok {name}: {got!r}")


def main():
    tmp = Path(tempfile.mkdtemp(prefix="kduel-smoke-"))
    k = import_module(tmp)

    # counting: the four-entry table has three strings of complexity <= 2,
    # and the binary search finds that in m+2 = 4 oracle queries
    dec = k.Decompressor.from_trace(WORKED_TRACE)
    check("table size", len(dec), 4)
    check("complexity of 11", dec.complexity_of("11"), 3)
    check("complexity of empty string", dec.complexity_of("e"), 2)
    check("complexity of unseen string", dec.complexity_of("0101"), None)
    check("direct count", dec.simple_count(2), 3)
    check("search count", dec.count_simple(2), (3, 4))
    check("prefix-free", dec.is_prefix_free(), True)
    check("count_trace", k.count_trace(WORKED_TRACE, 2), (3, 4))

    by_hand = k.Decompressor()
    by_hand.insert("00", "e")
    by_hand.insert("01", "0", 1)
    by_hand.insert("10", "1", 2)
    by_hand.insert("110", "11", 5)
    check("hand-built count", by_hand.count_simple(2), (3, 4))
    by_hand.insert("11", "10", 1)
    check("prefix collision detected", by_hand.is_prefix_free(), False)

    # fixed point: beta = [1,2,2,1,2] has beta(l) >= l up to l = 2
    check("fixed point", k.fixed_point([1, 2, 2, 1, 2]), 2)
    try:
        k.fixed_point([1, 2, 5])
    except ValueError as e:
        print(f"ok no fixed point raises: {e}")
    else:
        sys.exit("fixed_point accepted beta(q) >= q")

    # threshold: light past volume yields the full price, heavy yields zero
    check("threshold light", k.threshold(2, 3, 1, 0, 3, 2, 1), 2)
    check("threshold heavy", k.threshold(2, 3, 1, 20, 3, 2, 0), 0)

    # referee: printing and reparsing preserves the tree
    ref = k.Referee.random(0, 2, ["01", "10"], (1, 4), (0, 1))
    check("referee depth", ref.depth, 2)
    again = k.Referee.parse(str(ref))
    check("referee reprint", str(again), str(ref))
    support = ref.support()
    assert support and all(x in ("01", "10") for x, _ in support)
    print(f"ok referee support: {support}")

    # game: Bob can afford the flip with budget 2, so he wins, and the
    # stolen strategy pins the output back at the original target
    (tmp / "flip.ref").write_text(FLIP_REF)
    (tmp / "bobwin.game").write_text(BOBWIN_GAME)
    game = k.Game.load(str(tmp / "bobwin.game"))
    check("game target", game.target, 1)
    check("game budgets", game.budgets, (0, 2))
    winner, states, initial = game.solve()
    check("solved winner", winner, "B")
    check("initial output", initial, 0)
    assert states > 0
    lines, verdict = game.trace()
    check("trace verdict", verdict, ("B", 1, 1))
    print(f"ok trace lines: {lines}")
    dummy, adjusted, final, replays = game.steal_and_verify(replays=7, seed=99)
    check("stolen dummy level", dummy, 0)
    check("stolen adjusted target", adjusted, 2)
    check("stolen final output", final, 1)
    check("stolen replays", replays, 7)

    parsed = k.Game.parse(BOBWIN_GAME, str(tmp))
    check("parsed winner", parsed.solve()[0], "B")

    # fighter: three events through a one-level scaled tower
    (tmp / "one.ref").write_text(FIGHTER_REF)
    report = k.run_fighter(FIGHTER_CFG, FIGHTER_EVENTS, str(tmp))
    assert "events processed=3" in report, report
    assert "params level=1 n=3 m=5 cap=8" in report, report
    print("ok fighter report:")
    print("  " + "\n  ".join(report.rstrip("\n").split("\n")))

    print("smoke test passed")


if __name__ == "__main__":
    main()
