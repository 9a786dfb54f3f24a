"""Run frame selection on the mini-dataset and print every candidate group's score."""
import argparse
from pathlib import Path

from smokelab.constraints import ConstraintKind, fuse_probability, label_to_constraint
from smokelab.fileio import load_labels, load_probmap
from smokelab.pipeline import frame_paths
from smokelab.selection import SelectionConfig, score_groups, select_frames

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--root", default=str(Path(__file__).resolve().parents[1] / "data" / "mini"))
    args = ap.parse_args()
    root = Path(args.root)
    cfg = SelectionConfig()
    for vid, label in sorted(load_labels(root / "labels.csv").items()):
        decision = label_to_constraint(label)
        print(f"{vid}: label {label.raw_value} ({label.meaning}) -> {decision.kind.value}")
        if decision.kind is ConstraintKind.SKIP:
            continue
        frames = [fuse_probability(load_probmap(p), decision)
                  for p in frame_paths(root / "frames" / vid)]
        for g in score_groups(frames, cfg, return_all=True):
            print(f"  centre {g.center_index}  members {list(g.member_indices)}  "
                  f"coherence {g.coherence:.4f}  score {g.composite_score:.4f}")
        print(f"  selected {select_frames(frames, cfg)}")
