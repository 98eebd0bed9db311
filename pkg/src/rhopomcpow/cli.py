"""Command line entry point: ``rhopomcpow {run,profile,bounds,oracle} ...``."""
import argparse
import json
import logging
from pathlib import Path
import sys

from . import harness
from .model import ContractError

log = logging.getLogger("rhopomcpow")


def _load_json(path):
    return json.loads(Path(path).read_text()) if path else {}


def cmd_run(args):
    cfg = harness.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.episodes is not None:
        cfg.episodes = args.episodes
    out = Path(args.out or cfg.out)
    cfg.out = str(out)

    def progress(done, total):
        if done % 10 == 0 or done == total:
            log.info("episode %d / %d", done, total)

    records = harness.run_experiment(cfg, workers=args.workers, progress=progress)
    paths = harness.emit_reports(records, out, cfg)
    sys.stdout.write(paths["summary"].read_text())
    return 0


def cmd_profile(args):
    opts = _load_json(args.config)
    if args.seed is not None:
        opts["seed"] = args.seed
    if args.iterations is not None:
        opts["iterations"] = args.iterations
    out = Path(args.out or opts.pop("out", "results/profile"))
    opts.pop("out", None)
    out.mkdir(parents=True, exist_ok=True)
    res = harness.timing_profile(**opts)
    harness.write_timings(res["curves"], out)
    meta = {k: res[k] for k in ("digests", "actions", "slopes", "fit_range", "iterations",
                                "digest_match", "repeats")}
    meta["config"] = opts
    (out / "profile.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"slopes": res["slopes"], "digest_match": res["digest_match"]}, indent=2))
    return 0


def cmd_bounds(args):
    opts = _load_json(args.config)
    if args.seed is not None:
        opts["seed"] = args.seed
    out = Path(args.out or opts.pop("out", "results/bounds"))
    opts.pop("out", None)
    out.mkdir(parents=True, exist_ok=True)
    rows = harness.visitation_bounds(**opts)
    harness.write_bounds(rows, out)
    summary = harness.bounds_summary(rows)
    (out / "bounds_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0 if summary["violations"] == 0 else 1


def cmd_oracle(args):
    seed = 0 if args.seed is None else args.seed
    res = {}
    if args.which in ("shannon", "all"):
        res["shannon"] = harness.shannon_oracle(n=args.shannon_n, seed=seed)
    if args.which in ("boers", "all"):
        res["boers"] = harness.boers_oracle(n=args.boers_n, seed=seed)
    if args.which in ("lvu", "all"):
        res["lvu"] = harness.lvu_oracle(n_updates=args.lvu_n, seed=seed)
    text = json.dumps(res, indent=2, default=float)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(text + "\n")
    print(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="rhopomcpow", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required,
                        help="JSON config (a run manifest also works for `run`)")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--out", default=None, help="output directory")

    r = sub.add_parser("run", help="closed-loop episodes; writes summary/records/manifest")
    common(r, config_required=True)
    r.add_argument("--workers", "--threads", type=int, default=1, dest="workers",
                   help="parallel episode workers (processes)")
    r.add_argument("--episodes", type=int, default=None)
    r.set_defaults(func=cmd_run)

    pr = sub.add_parser("profile", help="paired cumulative planning-time curves")
    common(pr)
    pr.add_argument("--iterations", type=int, default=None)
    pr.set_defaults(func=cmd_profile)

    b = sub.add_parser("bounds", help="visitation lower-bound experiment")
    common(b)
    b.set_defaults(func=cmd_bounds)

    o = sub.add_parser("oracle", help="incremental vs from-scratch oracle sweeps")
    common(o)
    o.add_argument("--which", choices=("shannon", "boers", "lvu", "all"), default="all")
    o.add_argument("--shannon-n", type=int, default=10_000)
    o.add_argument("--boers-n", type=int, default=2_000)
    o.add_argument("--lvu-n", type=int, default=100_000)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ContractError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
