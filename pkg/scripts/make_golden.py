"""Regenerate the golden traces for the three worked-example scenarios.

    python scripts/make_golden.py [--check]

With --check nothing is written; the exit status says whether the committed
files still match.
"""

import argparse
import sys
from pathlib import Path

from nmrsim import scenario as sc

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"
NAMES = ("example-move-atomic-global", "example-move-atomic-local", "example-fsync")


def render(name: str) -> str:
    scn = sc.load(sc.resolve(name))
    return sc.run_seed(scn, scn.seeds[0]).trace.dumps()


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    stale = []
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        path = GOLDEN / f"{name}.jsonl"
        text = render(name)
        if args.check:
            if not path.exists() or path.read_text() != text:
                stale.append(name)
        else:
            path.write_text(text)
            print(f"wrote {path} ({text.count(chr(10))} events)")
    for name in stale:
        print(f"stale: {name}")
    return 1 if stale else 0


if __name__ == "__main__":
    sys.exit(main())
