"""Command-line entry point: ``smokelab <subcommand> ...``."""
import argparse
import logging
import sys
from pathlib import Path

from .metrics import MMSE_MODES


def _cmd_pseudolabel(args):
    from .pipeline import RunConfig, resolve_seed, run_pseudolabel

    cfg = RunConfig.from_json(args.config)
    cfg.seed = resolve_seed(cfg.seed, args.seed)
    if args.jobs is not None:
        cfg.parallelism = args.jobs
    m = run_pseudolabel(cfg)
    s = m["summary"]
    print(f"processed {s['processed']}, skipped {s['skipped']}, errors {s['error']} "
          f"-> {cfg.path('output_dir') / 'manifest.json'}")
    return 0


def _cmd_evaluate(args):
    from .pipeline import run_evaluate

    report = run_evaluate(args.pred, args.gt, args.out, opacity_dir=args.opacity_gt,
                          micro=args.micro, mmse_mode=args.mmse_mode, threshold=args.threshold)
    for k, v in report.means.items():
        print(f"{k:16s} {'n/a' if v is None else f'{v:.6f}'}  (skipped {report.skipped[k]})")
    return 0


def _cmd_crop(args):
    from .cropping import PatchSpec
    from .pipeline import run_crop

    spec = PatchSpec(args.size, args.offset_radius, args.seed, args.connectivity)
    rec = run_crop(args.images, args.masks, args.out, spec)
    n = sum(len(v) for v in rec["images"].values())
    print(f"{n} patches from {len(rec['images'])} images -> {args.out}")
    return 0


def _cmd_toy_da(args):
    from .toy import TrainSchedule, default_spec, train, write_history_csv

    spec = default_spec(offset=args.offset, seed=args.seed)
    sched = TrainSchedule(epochs=args.epochs, seed=args.seed)
    res = train(spec, sched, adversarial=not args.no_adversarial)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_history_csv(res.history, out / "history.csv")
    frozen = res.probe(args.seed, frozen=True)
    final = res.probe(args.seed, frozen=False)
    h = res.history
    print(f"seg loss {h[0]['seg_loss']:.4f} -> {h[-1]['seg_loss']:.4f}; "
          f"probe accuracy frozen {frozen:.4f}, trained {final:.4f}")
    return 0


def _cmd_check_grads(args):
    from .gradcheck import TOLERANCE, run_gradient_suite

    errs = run_gradient_suite(trials=args.trials, eps=args.eps, seed=args.seed)
    ok = True
    for op, e in errs.items():
        status = "ok" if e <= TOLERANCE else "FAIL"
        ok &= e <= TOLERANCE
        print(f"{op:24s} max rel err {e:.3e}  {status}")
    return 0 if ok else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="smokelab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("pseudolabel", help="select frames and write pseudo-label masks")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides SMOKELAB_SEED and the config")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_pseudolabel)

    p = sub.add_parser("evaluate", help="pixel-wise metrics for a prediction directory")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", default=None)
    p.add_argument("--opacity-gt", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--micro", action="store_true", help="pooled counts instead of per-image means")
    p.add_argument("--mmse-mode", choices=MMSE_MODES, default="binary")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="binarisation threshold for 16-bit probability predictions")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("crop", help="multi-patch cropping around smoke components")
    p.add_argument("--images", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--size", type=int, default=600)
    p.add_argument("--offset-radius", type=int, default=100)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_crop)

    p = sub.add_parser("toy-da", help="adversarial adaptation on synthetic Gaussian domains")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--offset", type=float, default=2.0, help="domain shift in units of sigma")
    p.add_argument("--no-adversarial", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_toy_da)

    p = sub.add_parser("check-grads", help="finite-difference gradient checks")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check_grads)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
