"""Command-line entry point: ``pecann {train,diagnose,condition,report}``.

Output goes under ``--output`` (default ``$PECANN_OUTPUT`` or ``./runs``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
import warnings
from pathlib import Path

import numpy as np

from .alm import MultiplierSet, default_config, train
from .diagnostics import amplification_report, histogram, perturb, write_histogram_csv
from .metrics import load_manifest, save_run
from .problems import PROBLEMS, convection_diffusion_condition, get_problem


__all__ = ["main", "build_parser"]

log = logging.getLogger("pecann")

DEFAULT_ALPHAS = (1e-1, 1e-2, 1e-3, 1e-4)
# offset between the init stream and the perturbation stream of one seed
PERTURB_STREAM = 1_000_003


def _output_root(arg: str | None) -> Path:
    return Path(arg or os.environ.get("PECANN_OUTPUT", "runs"))


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s}")
    return v


def _problem_name(s: str) -> str:
    key = s.replace("-", "_")
    if key not in PROBLEMS:
        raise argparse.ArgumentTypeError(f"unknown problem {s!r}; choose from "
                                         + ", ".join(k.replace("_", "-") for k in PROBLEMS))
    return key


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pecann", description="Constrained neural PDE solvers.")
    p.add_argument("--verbose", action="store_true", help="log progress every 100 epochs")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a problem for one or more seeds",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    t.add_argument("--problem", type=_problem_name, required=True,
                   help="poisson1d, composite-heat, convection-diffusion or reaction-diffusion")
    t.add_argument("--epochs", type=_positive_int, default=None, help="epochs (problem preset if omitted)")
    t.add_argument("--seed", type=int, default=0, help="base seed; trial i uses seed + i")
    t.add_argument("--trials", type=_positive_int, default=1)
    t.add_argument("--mu-max", type=_positive_float, default=None, help="penalty cap (preset 1e4)")
    t.add_argument("--huber-delta", type=_positive_float, default=1.0)
    t.add_argument("--k", type=_positive_float, default=2.0, help="conductivity ratio (composite-heat)")
    t.add_argument("--alpha", type=_positive_float, default=1e-4, help="diffusivity (convection-diffusion)")
    t.add_argument("--metrics-every", type=_positive_int, default=1)
    t.add_argument("--output", default=None)

    d = sub.add_parser("diagnose", help="perturbation study on the Poisson problem",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    d.add_argument("--epochs", type=_positive_int, default=1000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--scale", type=float, default=0.05, help="perturbation size (>= 0)")
    d.add_argument("--bins", type=_positive_int, default=50)
    d.add_argument("--output", default=None)

    c = sub.add_parser("condition", help="condition number of the boundary-layer solution vs alpha",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    c.add_argument("--alphas", type=_positive_float, nargs="+", default=list(DEFAULT_ALPHAS))
    c.add_argument("--points", type=_positive_int, default=100)
    c.add_argument("--output", default=None)

    r = sub.add_parser("report", help="rebuild summary.json from existing run directories")
    r.add_argument("runs", nargs="+", help="run directories, or parents containing them")
    r.add_argument("--output", default=None, help="summary path (default: first argument/summary.json)")
    return p


def _spec_for(args):
    if args.problem == "composite_heat":
        return get_problem(args.problem, k=args.k)
    if args.problem == "convection_diffusion":
        return get_problem(args.problem, alpha=args.alpha)
    return get_problem(args.problem)


def summarize(manifests: list[dict]) -> dict:
    """Median of every final metric over the given runs."""
    keys = sorted({k for m in manifests for k in m.get("all_metrics", m.get("metrics", {}))})
    med = {}
    for k in keys:
        vals = [m.get("all_metrics", m.get("metrics", {})).get(k) for m in manifests]
        vals = [v for v in vals if v is not None and np.isfinite(v)]
        if vals:
            med[k] = statistics.median(vals)
    return {"problem": manifests[0]["problem"] if manifests else None,
            "trials": len(manifests), "seeds": [m.get("seed") for m in manifests],
            "failed": sum(bool(m.get("failed")) for m in manifests), "median": med}


def _progress_hook(label: str):
    def hook(row):
        if row["epoch"] % 100 == 0:
            log.info("%s epoch %d loss %.4e", label, row["epoch"], row["loss"])
    return hook


def cmd_train(args) -> int:
    spec = _spec_for(args)
    root = _output_root(args.output) / spec.name
    manifests = []
    failed = False
    for i in range(args.trials):
        seed = args.seed + i
        cfg = default_config(spec, epochs=args.epochs, seed=seed, mu_max=args.mu_max,
                             huber_delta=args.huber_delta, metrics_every=args.metrics_every)
        rec = train(spec, cfg, hooks=_progress_hook(f"{spec.name} seed {seed}"))
        save_run(rec, root / f"seed_{seed}")
        manifests.append(rec.manifest())
        failed |= rec.failed
        print(f"{spec.name} seed {seed}: " + ", ".join(f"{k}={v:.3e}" for k, v in rec.manifest()["metrics"].items()))
    summary = summarize(manifests)
    (root / "summary.json").write_text(json.dumps(summary, indent=2))
    print(f"summary written to {root / 'summary.json'}")
    return 1 if failed else 0


def cmd_diagnose(args) -> int:
    if args.scale < 0:
        print("error: --scale must be >= 0", file=sys.stderr)
        return 2
    spec = get_problem("poisson1d")
    out = _output_root(args.output) / "diagnose" / f"seed_{args.seed}"
    rec = train(spec, default_config(spec, epochs=args.epochs, seed=args.seed),
                hooks=_progress_hook(f"poisson1d seed {args.seed}"))
    save_run(rec, out / "run")
    theta_t = perturb(rec.theta, spec.network, args.scale, seed=args.seed + PERTURB_STREAM)
    mult = MultiplierSet(dict(rec.multipliers), rec.mu, rec.config["mu_max"])
    with warnings.catch_warnings():
        # the zero-scale case is reported on stderr below
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = amplification_report(spec, rec.theta, theta_t, multipliers=mult,
                                   huber_delta=rec.config["huber_delta"])
    rep.summary.update({"seed": args.seed, "scale": args.scale, "epochs": args.epochs})
    rep.to_csv(out / "deltas.csv")
    rep.gradients_to_csv(out / "gradients.csv")
    rep.to_json(out / "summary.json")
    for name, vals in (("params_clean", rec.theta), ("params_perturbed", theta_t),
                       ("grad_clean", rep.grad_clean), ("grad_perturbed", rep.grad_perturbed)):
        write_histogram_csv(out / f"hist_{name}.csv", *histogram(vals, args.bins))
    s = rep.summary
    if s["vacuous"]:
        print("warning: zero perturbation, amplification flag is vacuously true", file=sys.stderr)
    print(f"mean deltas u={s['mean_delta_u']:.3e} u_x={s['mean_delta_ux']:.3e} u_xx={s['mean_delta_uxx']:.3e}; "
          f"monotone={s['monotone_amplification']}; grad inf-norm {s['grad_inf_clean']:.3e} -> "
          f"{s['grad_inf_perturbed']:.3e}")
    print(f"report written to {out}")
    return 1 if rec.failed else 0


def cmd_condition(args) -> int:
    root = _output_root(args.output)
    root.mkdir(parents=True, exist_ok=True)
    rows = [convection_diffusion_condition(a, args.points) for a in args.alphas]
    path = root / "condition.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "kappa_max", "kappa_max_pointwise"])
        for r in rows:
            w.writerow([format(r["alpha"], ".17g"), format(r["kappa_norm"], ".17g"),
                        format(r["kappa_max_pointwise"], ".17g")])
            print(f"alpha={r['alpha']:.1e} kappa={r['kappa_norm']:.6e} pointwise_max={r['kappa_max_pointwise']:.6e}")
    print(f"written to {path}")
    return 0


def _find_runs(paths: list[str]) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if (p / "manifest.json").exists():
            found.append(p)
        elif p.is_dir():
            found.extend(sorted(q.parent for q in p.glob("*/manifest.json")))
    return found


def cmd_report(args) -> int:
    runs = _find_runs(args.runs)
    if not runs:
        print("error: no run directories with manifest.json found", file=sys.stderr)
        return 2
    summary = summarize([load_manifest(r) for r in runs])
    dest = Path(args.output) if args.output else Path(args.runs[0]) / "summary.json"
    dest.write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary["median"], indent=2))
    print(f"summary written to {dest}")
    return 1 if summary["failed"] else 0


COMMANDS = {"train": cmd_train, "diagnose": cmd_diagnose, "condition": cmd_condition, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
