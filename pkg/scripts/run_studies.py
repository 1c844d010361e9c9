"""Run every CLI study at full size into one output directory."""
import argparse
import sys

from lumigroup.cli import main as cli

STUDIES = ("distortion", "sampling-window", "rooms", "users", "pattern-length", "grouping-frequency")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="results/studies")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    a = ap.parse_args()
    for name in STUDIES:
        code = cli(["study", name, "-o", f"{a.out}/{name}", "--seed", str(a.seed), "--jobs", str(a.jobs)])
        print(f"{name}: exit {code}", flush=True)
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
