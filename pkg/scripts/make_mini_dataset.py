"""Regenerate the bundled mini-dataset under data/mini."""
import argparse
from pathlib import Path

from smokelab.minidata import write_mini_dataset

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "mini"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(write_mini_dataset(args.out, args.seed))
