"""Experiment configuration: a JSON document with unit-suffixed keys.

Physical quantities carry their unit in the key name (``larmor_khz``,
``t_us``, ``dephasing_per_s``) to prevent silent unit bugs.  Frequencies in
kHz are converted according to ``units.frequency_convention``:

* ``angular`` (default): the number is an ordinary frequency f, converted to
  angular frequency 2*pi*f internally;
* ``linear``: the number is used directly as an angular rate in krad/s.

Whether literature coupling values are ordinary or angular frequencies is
genuinely ambiguous; the convention is therefore a config switch, and the
bundled reproduction configs pin ``angular``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .models import ModelSpec

__all__ = ["ExperimentConfig", "load_config", "parse_config", "config_hash"]

_TWO_PI = 2.0 * math.pi


def _freq(value_khz: float, convention: str) -> float:
    if convention == "angular":
        return _TWO_PI * 1e3 * float(value_khz)
    if convention == "linear":
        return 1e3 * float(value_khz)
    raise ConfigError(f"units.frequency_convention must be 'angular' or 'linear', got {convention!r}")


def _get(section: dict, key: str, default=None, required: bool = False, context: str = ""):
    if key in section:
        return section[key]
    if required:
        raise ConfigError(f"missing required key {context}{key}")
    return default


def _complex_matrix(node, context: str) -> np.ndarray:
    if not isinstance(node, dict) or "real" not in node:
        raise ConfigError(f"{context} must be an object with 'real' (and optional 'imag') arrays")
    real = np.asarray(node["real"], dtype=float)
    imag = np.asarray(node.get("imag", np.zeros_like(real)), dtype=float)
    if real.shape != imag.shape or real.ndim != 2 or real.shape[0] != real.shape[1]:
        raise ConfigError(f"{context}: real/imag must be equal square matrices")
    return real + 1j * imag


@dataclass
class ExperimentConfig:
    """Parsed and unit-normalized experiment description."""

    model: ModelSpec
    noise: dict = field(default_factory=dict)        # keys: dephasing, jump_down, jump_up (1/s)
    m_list: list[int] = field(default_factory=lambda: [1, 10, 100, 1000])
    samples: int = 20000
    seed: int = 0
    bins: int = 101
    class_edges: list[float] | None = None
    initial_state: object = "maximally_mixed"        # str, int basis index, or matrix
    fidelity_targets: str = "noise_eigenstates"      # or "fixed_points"
    output_directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")
    frequency_convention: str = "angular"
    sweep_key: str | None = None
    sweep_values: list | None = None
    raw: dict = field(default_factory=dict)

    def resolve_initial_state(self, dim: int) -> np.ndarray:
        state = self.initial_state
        if isinstance(state, str) and state == "maximally_mixed":
            return np.eye(dim, dtype=complex) / dim
        if isinstance(state, int):
            if not 0 <= state < dim:
                raise ConfigError(f"basis label {state} out of range for dimension {dim}")
            rho = np.zeros((dim, dim), dtype=complex)
            rho[state, state] = 1.0
            return rho
        rho = np.asarray(state, dtype=complex)
        if rho.shape != (dim, dim):
            raise ConfigError(f"initial state shape {rho.shape} does not match dimension {dim}")
        tr = complex(np.trace(rho))
        if abs(tr - 1.0) > 1e-9:
            raise ConfigError(f"initial state trace {tr} is not 1")
        return rho


def _parse_model(doc: dict, convention: str, base_dir: Path) -> ModelSpec:
    model = _get(doc, "model", required=True, context="")
    seq = _get(doc, "sequence", {})
    kind = _get(model, "type", required=True, context="model.")
    spec = ModelSpec(kind=kind)

    hyper = _get(model, "hyperfine_khz")
    if hyper is not None:
        hyper = np.asarray(hyper, dtype=float)
        if hyper.ndim == 1:
            hyper = hyper[None, :]
        if hyper.shape[1] != 3:
            raise ConfigError("model.hyperfine_khz entries must be 3-vectors")
        spec.hyperfine = [[_freq(x, convention) for x in row] for row in hyper]
    spec.larmor = _freq(_get(model, "larmor_khz", 0.0), convention)
    spec.detuning = _freq(_get(model, "detuning_khz", 0.0), convention)
    spec.secular = bool(_get(model, "secular", False))

    dip = _get(model, "dipolar", {})
    if dip:
        if "positions_nm" in dip:
            spec.positions = [np.asarray(p, dtype=float) * 1e-9 for p in dip["positions_nm"]]
            gam = _get(dip, "gyromagnetic_mhz_per_t", required=True, context="model.dipolar.")
            spec.gyromagnetic = _TWO_PI * 1e6 * float(gam)
        else:
            axes = {(int(j), int(k)): ax for j, k, ax in _get(dip, "axes", [])}
            entries = []
            for j, k, coupling in _get(dip, "couplings_khz", required=True, context="model.dipolar."):
                axis = axes.get((int(j), int(k)), [0.0, 0.0, 1.0])
                entries.append((int(j), int(k), _freq(coupling, convention), axis))
            spec.dipolar = entries

    if kind == "explicit":
        spec.b_matrix = _complex_matrix(_get(model, "b_matrix", required=True, context="model."), "model.b_matrix")
        spec.h_matrix = _complex_matrix(_get(model, "h_matrix", required=True, context="model."), "model.h_matrix")
    elif not spec.hyperfine:
        raise ConfigError(f"model.hyperfine_khz is required for model type {kind!r}")

    spec.sequence = _get(seq, "type", "rim")
    if spec.sequence not in ("rim", "cpmg"):
        raise ConfigError(f"sequence.type must be 'rim' or 'cpmg', got {spec.sequence!r}")
    if spec.sequence == "cpmg":
        spec.tau = 1e-6 * float(_get(seq, "tau_us", required=True, context="sequence."))
        spec.n_pulses = int(_get(seq, "n_pulses", required=True, context="sequence."))
        if spec.n_pulses <= 0 or spec.n_pulses % 2:
            raise ConfigError("sequence.n_pulses must be a positive even integer")
        if kind != "dd_effective":
            raise ConfigError("sequence.type 'cpmg' requires model.type 'dd_effective'")
    else:
        if "t_us" in seq:
            spec.t = 1e-6 * float(seq["t_us"])
        elif "t_s" in seq:
            spec.t = float(seq["t_s"])
        else:
            raise ConfigError("sequence needs t_us (or t_s)")
    spec.delta_phi = float(_get(seq, "delta_phi_rad", math.pi / 2))
    return spec


def _parse_initial_state(node, base_dir: Path):
    if node is None or node == "maximally_mixed":
        return "maximally_mixed"
    if isinstance(node, dict):
        if "basis" in node:
            return int(node["basis"])
        if "matrix" in node:
            return _complex_matrix(node["matrix"], "run.initial_state.matrix")
        if "file" in node:
            path = base_dir / str(node["file"])
            if not path.exists():
                raise ConfigError(f"initial state file {path} does not exist")
            if path.suffix == ".npy":
                return np.load(path)
            with open(path, encoding="utf-8") as fh:
                return _complex_matrix(json.load(fh), str(path))
    raise ConfigError(f"unrecognized run.initial_state: {node!r}")


def parse_config(doc: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    """Validate and unit-normalize a config document."""
    base_dir = Path(base_dir)
    units = _get(doc, "units", {})
    convention = _get(units, "frequency_convention", "angular")
    if convention not in ("angular", "linear"):
        raise ConfigError(f"units.frequency_convention: {convention!r}")
    model = _parse_model(doc, convention, base_dir)

    run = _get(doc, "run", {})
    if "m_list" in run:
        m_list = [int(m) for m in run["m_list"]]
    else:
        m_list = [int(_get(run, "m", 1000))]
    if not m_list or any(m < 1 for m in m_list):
        raise ConfigError("run.m / run.m_list entries must be >= 1")
    samples = int(_get(run, "samples", 20000))
    if samples < 1:
        raise ConfigError("run.samples must be >= 1")

    noise_doc = _get(doc, "noise", {})
    noise = {}
    for key in ("dephasing", "jump_down", "jump_up"):
        val = noise_doc.get(f"{key}_per_s", 0.0)
        noise[key] = [float(v) for v in (val if isinstance(val, (list, tuple)) else [val])]
        if any(v < 0 or not math.isfinite(v) for v in noise[key]):
            raise ConfigError(f"noise.{key}_per_s must be finite and non-negative")

    outputs = _get(doc, "outputs", {})
    sweep = _get(doc, "sweep", {})
    fidelity_targets = _get(run, "fidelity_targets", "noise_eigenstates")
    if fidelity_targets not in ("noise_eigenstates", "fixed_points"):
        raise ConfigError("run.fidelity_targets must be 'noise_eigenstates' or 'fixed_points'")

    return ExperimentConfig(
        model=model,
        noise=noise,
        m_list=m_list,
        samples=samples,
        seed=int(_get(run, "seed", 0)),
        bins=int(_get(run, "bins", 101)),
        class_edges=[float(x) for x in run["class_edges"]] if "class_edges" in run else None,
        initial_state=_parse_initial_state(_get(run, "initial_state"), base_dir),
        fidelity_targets=fidelity_targets,
        output_directory=str(_get(outputs, "directory", "out")),
        formats=tuple(_get(outputs, "formats", ["csv", "json"])),
        frequency_convention=convention,
        sweep_key=_get(sweep, "key") if sweep else None,
        sweep_values=list(sweep["values"]) if sweep and "values" in sweep else None,
        raw=copy.deepcopy(doc),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    return parse_config(doc, base_dir=path.parent)


def config_hash(doc: dict) -> str:
    """Stable hash of the raw config document (canonical JSON, sorted keys)."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
