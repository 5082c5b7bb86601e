"""Error norms and run persistence.

A run directory holds ``manifest.json``, ``history.csv``, ``checkpoint.json``,
``multipliers.csv`` and ``solution.csv``.  Floats are written with 17
significant digits so a checkpoint reloads bit-exactly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import NetworkConfig

__all__ = ["rel_l2", "linf", "mae", "mse", "error_metrics", "RunRecord", "save_run", "load_checkpoint",
           "load_manifest", "CheckpointError"]

FLOAT_FMT = ".17g"


class CheckpointError(ValueError):
    """Checkpoint contents do not match the declared network."""


def _pair(pred, exact):
    p = np.asarray(pred, dtype=np.float64).ravel()
    e = np.asarray(exact, dtype=np.float64).ravel()
    if p.shape != e.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {e.size} exact values")
    return p, e


def rel_l2(pred, exact) -> float:
    p, e = _pair(pred, exact)
    den = np.linalg.norm(e)
    if den == 0.0:
        raise ValueError("relative L2 error is undefined for an all-zero exact solution")
    return float(np.linalg.norm(p - e) / den)


def linf(pred, exact) -> float:
    p, e = _pair(pred, exact)
    return float(np.max(np.abs(p - e))) if p.size else 0.0


def mae(pred, exact) -> float:
    """Mean absolute error."""
    p, e = _pair(pred, exact)
    return float(np.mean(np.abs(p - e)))


def mse(pred, exact) -> float:
    p, e = _pair(pred, exact)
    return float(np.mean((p - e) ** 2))


def error_metrics(pred: dict, exact: dict) -> dict[str, float]:
    """``rel_l2_*``, ``linf_*``, ``mae_*`` and ``mse_*`` for each shared output."""
    out = {}
    for name, ev in exact.items():
        if name not in pred:
            continue
        pv = pred[name]
        try:
            out[f"rel_l2_{name}"] = rel_l2(pv, ev)
        except ValueError:
            out[f"rel_l2_{name}"] = math.nan
        out[f"linf_{name}"] = linf(pv, ev)
        out[f"mae_{name}"] = mae(pv, ev)
        out[f"mse_{name}"] = mse(pv, ev)
    return out


@dataclass
class RunRecord:
    """Everything a training run produces.

    ``history`` holds one dict per completed epoch; ``solution`` maps column
    names to dense-grid arrays (inputs, predictions, exact values).
    """

    problem: str
    seed: int
    config: dict
    network: NetworkConfig
    theta: np.ndarray
    history: list[dict] = field(default_factory=list)
    multipliers: dict[str, np.ndarray] = field(default_factory=dict)
    mu: float = 1.0
    solution: dict[str, np.ndarray] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    failed: bool = False
    failure: str = ""

    @property
    def epochs_completed(self) -> int:
        return len(self.history)

    def loss_trace(self) -> np.ndarray:
        return np.array([row["loss"] for row in self.history])

    def manifest(self) -> dict:
        metrics = {k: self.metrics[k] for k in ("rel_l2_u", "rel_l2_sigma", "linf_u", "mae_u", "mse_u")
                   if k in self.metrics}
        return {
            "problem": self.problem,
            "seed": self.seed,
            "epochs": self.config.get("epochs"),
            "epochs_completed": self.epochs_completed,
            "mu_max": self.config.get("mu_max"),
            "huber_delta": self.config.get("huber_delta"),
            "network": {"dims": self.network.dims, "activation": self.network.activation},
            "metrics": metrics,
            "all_metrics": dict(self.metrics),
            "config": dict(self.config),
            "started": self.started,
            "finished": self.finished,
            "failed": self.failed,
            "failure": self.failure,
        }


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), FLOAT_FMT)


def _write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def save_run(record: RunRecord, directory) -> Path:
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create run directory {d}: {exc}") from exc
    try:
        (d / "manifest.json").write_text(json.dumps(record.manifest(), indent=2, default=float))
        ckpt = {"network": record.network.to_dict(),
                "theta": [format(float(v), FLOAT_FMT) for v in record.theta]}
        (d / "checkpoint.json").write_text(json.dumps(ckpt))
    except OSError as exc:
        raise OSError(f"cannot write into {d}: {exc}") from exc
    if record.history:
        keys = list(record.history[0])
        _write_csv(d / "history.csv", keys, ([row.get(k, math.nan) for k in keys] for row in record.history))
    else:
        _write_csv(d / "history.csv", ["epoch"], [])
    mrows = []
    for fam, lam in record.multipliers.items():
        mrows.extend((fam, i, v) for i, v in enumerate(np.asarray(lam)))
    with (d / "multipliers.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "index", "lambda"])
        for fam, i, v in mrows:
            w.writerow([fam, i, _fmt(v)])
    if record.solution:
        cols = list(record.solution)
        _write_csv(d / "solution.csv", cols, zip(*(record.solution[c] for c in cols)))
    return d


def load_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    return json.loads(path.read_text())


def load_checkpoint(path) -> tuple[NetworkConfig, np.ndarray]:
    """Read ``checkpoint.json`` (or a run directory containing one)."""
    p = Path(path)
    if p.is_dir():
        p = p / "checkpoint.json"
    if not p.exists():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    try:
        data = json.loads(p.read_text())
        config = NetworkConfig.from_dict(data["network"])
        theta = np.array([float(v) for v in data["theta"]], dtype=np.float64)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{p}: malformed checkpoint ({exc})") from exc
    if theta.shape != (config.n_params,):
        raise CheckpointError(f"{p}: {theta.size} parameters stored, network needs {config.n_params}")
    return config, theta
