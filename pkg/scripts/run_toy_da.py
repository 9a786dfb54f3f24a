"""Toy adversarial adaptation sweep: probe accuracy with and without the domain loss, over seeds."""
import argparse
import time

from smokelab.toy import TrainSchedule, default_spec, train

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--offset", type=float, default=2.0)
    args = ap.parse_args()
    print("seed  adversarial  frozen  trained  seg0    segN    secs")
    for seed in args.seeds:
        for adv in (False, True):
            t0 = time.perf_counter()
            res = train(default_spec(offset=args.offset, seed=seed),
                        TrainSchedule(epochs=args.epochs, seed=seed), adversarial=adv)
            h = res.history
            print(f"{seed:4d}  {str(adv):11s}  {res.probe(seed, True):.3f}   {res.probe(seed):.3f}    "
                  f"{h[0]['seg_loss']:.3f}  {h[-1]['seg_loss']:.3f}  {time.perf_counter() - t0:.1f}")
