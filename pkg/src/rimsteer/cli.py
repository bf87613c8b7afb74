"""Batch experiment runner.

Subcommands::

    rimsteer spectrum --config cfg.json --out dir [--seed N] [--threads N]
    rimsteer simulate --config cfg.json --out dir [--seed N] [--threads N]
    rimsteer stats    --config cfg.json --out dir [--seed N] [--threads N]
    rimsteer sweep    --config cfg.json --out dir [--seed N] [--threads N]

Outputs are machine-readable (JSON with sorted keys, CSV with 17 significant
digits) and byte-identical for a fixed config and seed regardless of the
worker-thread count; only the manifest timestamp varies between runs and it
is excluded from the reproducibility hash.  ``RIMSTEER_THREADS`` overrides
the thread count.  Exit codes: 0 success, 2 config error, 3 numerical
validation failure, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelAnalysis, analyze_channel
from .config import ExperimentConfig, config_hash, load_config
from .errors import (
    ConfigError,
    DimensionCap,
    NotAChannel,
    NotCommuting,
    NotPSD,
    RimsteerError,
    TooLarge,
    TooManySpins,
)
from .lindblad import NoiseSpec, noisy_rim_instrument
from .models import build_model, evolution_time
from .stats import commuting_peak_distribution, peak_report
from .trajectories import MeasurementInstrument, default_class_edges, run_ensemble

_CAP_ERRORS = (TooLarge, TooManySpins, DimensionCap)
_NUMERICAL_ERRORS = (NotAChannel, NotPSD)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=1, default=_json_default) + "\n",
        encoding="utf-8",
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell if isinstance(cell, str) else _fmt(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _matrix_payload(mat: np.ndarray) -> dict:
    return {"real": mat.real.tolist(), "imag": mat.imag.tolist()}


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


class _Runtime:
    """Model, channel analysis and instrument shared by the subcommands."""

    def __init__(self, cfg: ExperimentConfig, threads: int):
        self.cfg = cfg
        self.threads = threads
        self.ops = build_model(cfg.model)
        self.t = evolution_time(cfg.model)
        self.delta_phi = cfg.model.delta_phi
        self.analysis: ChannelAnalysis = analyze_channel(self.ops, self.t, self.delta_phi)
        noise = NoiseSpec(
            dephasing=tuple(cfg.noise.get("dephasing", [])),
            jump_down=tuple(cfg.noise.get("jump_down", [])),
            jump_up=tuple(cfg.noise.get("jump_up", [])),
        )
        n_spins = max(1, int(round(math.log2(self.ops.dim))))
        self.noise = noise.validate(n_spins)
        if self.noise.is_trivial():
            self.instrument = MeasurementInstrument.from_kraus_pair(self.analysis.kraus)
        else:
            self.instrument = noisy_rim_instrument(self.ops, self.noise, self.t, self.delta_phi)
        self.rho0 = cfg.resolve_initial_state(self.ops.dim)

    # fidelity targets, ordered by their expected X peak position (ascending,
    # matching the trajectory classes left to right)
    def targets(self) -> list[np.ndarray]:
        if self.cfg.fidelity_targets == "fixed_points":
            states = list(self.analysis.fixed.states)
        else:
            w, v = np.linalg.eigh(self.ops.b)
            states = [np.outer(v[:, k], v[:, k].conj()) for k in range(self.ops.dim)]
        bra = np.eye(self.ops.dim, dtype=complex).reshape(-1).conj()
        centers = [
            float((bra @ (self.instrument.e1 @ s.reshape(-1))).real) for s in states
        ]
        order = np.argsort(centers, kind="stable")
        return [states[i] for i in order]

    def class_edges(self) -> np.ndarray:
        if self.cfg.class_edges is not None:
            return np.asarray(self.cfg.class_edges, dtype=float)
        n_spins = max(1, int(round(math.log2(self.ops.dim))))
        return default_class_edges(n_spins)


def _manifest(cfg: ExperimentConfig, command: str) -> dict:
    # thread count and timestamp are run metadata, not result-determining;
    # the timestamp is excluded from the reproducibility hash and threads is omitted
    return {
        "command": command,
        "config_hash": config_hash(cfg.raw),
        "seed": cfg.seed,
        "versions": {
            "rimsteer": __version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def cmd_spectrum(rt: _Runtime, out_dir: Path) -> None:
    analysis = rt.analysis
    window = analysis.window
    payload = {
        "dim": rt.ops.dim,
        "eta": analysis.eta,
        "classification": analysis.classification.value,
        "has_rotating_points": analysis.has_rotating_points,
        "metastable_window": None
        if window is None
        else {
            "m_lo": _finite_or_none(window.m_lo),
            "m_hi": _finite_or_none(window.m_hi),
            "q": window.q,
            "separation": _finite_or_none(window.separation),
        },
        "eigenvalues": [
            {
                "re": float(lam.real),
                "im": float(lam.imag),
                "modulus": float(abs(lam)),
                "argument": float(np.angle(lam)),
            }
            for lam in analysis.spectrum
        ],
        "fixed_points": [
            {"rank": rank, "projector": _matrix_payload(proj)}
            for rank, proj in zip(analysis.fixed.ranks, analysis.fixed.projectors)
        ],
        "commutant_dim": analysis.fixed.commutant_dim,
        "cptp": {
            "trace_preservation": analysis.cptp.trace_preservation,
            "unitality": analysis.cptp.unitality,
            "min_choi_eigenvalue": analysis.cptp.min_choi_eigenvalue,
            "max_eigenvalue_modulus": analysis.cptp.max_eigenvalue_modulus,
        },
    }
    _write_json(out_dir / "spectrum.json", payload)


def cmd_simulate(rt: _Runtime, out_dir: Path) -> None:
    cfg = rt.cfg
    targets = rt.targets()
    edges = rt.class_edges()
    hist_rows = []
    fid_rows = []
    for m in cfg.m_list:
        ensemble = run_ensemble(
            rt.rho0,
            rt.instrument,
            m,
            cfg.samples,
            cfg.seed,
            bins=cfg.bins,
            class_edges=edges,
            targets=targets,
            workers=rt.threads,
            keep_final_states=False,
        )
        widths = np.diff(ensemble.histogram_edges)
        centers = 0.5 * (ensemble.histogram_edges[:-1] + ensemble.histogram_edges[1:])
        for c, n, w in zip(centers, ensemble.histogram_counts, widths):
            freq = n / cfg.samples
            hist_rows.append((m, c, int(n), freq, freq / w))
        pairing = _pair_targets_to_classes(len(targets), len(ensemble.class_stats))
        for idx, stat in enumerate(ensemble.class_stats):
            k = pairing[idx]
            fid = stat.fidelity_mean[k] if len(stat.fidelity_mean) else float("nan")
            se = stat.fidelity_stderr[k] if len(stat.fidelity_stderr) else float("nan")
            fid_rows.append((m, stat.label, fid, se, stat.sample_ratio))
    _write_csv(
        out_dir / "histogram.csv",
        ["m", "bin_center", "count", "frequency", "density"],
        hist_rows,
    )
    _write_csv(
        out_dir / "fidelity.csv",
        ["m", "bin_label", "mean_fidelity", "stderr", "sample_ratio"],
        fid_rows,
    )


def _pair_targets_to_classes(n_targets: int, n_classes: int) -> list[int]:
    """Class i tracks target i when counts match, else the proportional one."""
    if n_targets == 0:
        return [0] * n_classes
    if n_targets == n_classes:
        return list(range(n_classes))
    return [min(int(i * n_targets / n_classes), n_targets - 1) for i in range(n_classes)]


def cmd_stats(rt: _Runtime, out_dir: Path) -> None:
    cfg = rt.cfg
    m = max(cfg.m_list)
    report = peak_report(rt.rho0, rt.analysis, m)
    payload = {
        "m": m,
        "entries": [
            {
                "rank": e.rank,
                "weight": e.weight,
                "center_f1": e.center_f1,
                "center_x": e.center_x,
                "coherence": e.coherence,
                "variance": e.variance,
            }
            for e in report.entries
        ],
    }
    try:
        dist = commuting_peak_distribution(rt.rho0, rt.ops, rt.t, rt.delta_phi, m)
        payload["commuting"] = True
        payload["peak_distribution"] = {
            "f1": dist.f1_grid.tolist(),
            "p": dist.probs.tolist(),
            "sector_weights": dist.sector_weights.tolist(),
            "sector_centers": dist.sector_centers.tolist(),
        }
    except NotCommuting:
        payload["commuting"] = False
        payload["peak_distribution"] = None
    _write_json(out_dir / "peaks.json", payload)


def _set_dotted(doc: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value


def cmd_sweep(rt: _Runtime, out_dir: Path) -> None:
    cfg = rt.cfg
    if not cfg.sweep_key or not cfg.sweep_values:
        raise ConfigError("sweep requires sweep.key and a non-empty sweep.values list")
    from .config import parse_config  # local import to avoid cycle confusion

    index = []
    for i, value in enumerate(cfg.sweep_values):
        doc = json.loads(json.dumps(cfg.raw))
        _set_dotted(doc, cfg.sweep_key, value)
        doc.pop("sweep", None)
        sub_cfg = parse_config(doc)
        sub_dir = out_dir / f"point_{i:03d}"
        sub_dir.mkdir(parents=True, exist_ok=True)
        sub_rt = _Runtime(sub_cfg, rt.threads)
        cmd_spectrum(sub_rt, sub_dir)
        cmd_simulate(sub_rt, sub_dir)
        cmd_stats(sub_rt, sub_dir)
        _write_json(sub_dir / "manifest.json", _manifest(sub_cfg, "sweep-point"))
        index.append({"index": i, "key": cfg.sweep_key, "value": value, "directory": sub_dir.name})
    _write_json(out_dir / "index.json", {"points": index})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rimsteer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("spectrum", "channel spectrum, classification and fixed points"),
        ("simulate", "Monte Carlo histograms and fidelity curves"),
        ("stats", "analytic peak report (and p(F) for commuting models)"),
        ("sweep", "run all commands over a one-axis parameter sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory (default: config outputs.directory)")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for trajectory sampling")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = int(os.environ.get("RIMSTEER_THREADS", args.threads))
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = Path(args.out) if args.out else Path(cfg.output_directory)
        out_dir.mkdir(parents=True, exist_ok=True)
        rt = _Runtime(cfg, threads)
        if args.command == "spectrum":
            cmd_spectrum(rt, out_dir)
        elif args.command == "simulate":
            cmd_simulate(rt, out_dir)
        elif args.command == "stats":
            cmd_stats(rt, out_dir)
        elif args.command == "sweep":
            cmd_sweep(rt, out_dir)
        _write_json(out_dir / "manifest.json", _manifest(cfg, args.command))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _CAP_ERRORS as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 4
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical validation failure: {exc}", file=sys.stderr)
        return 3
    except RimsteerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
