"""Experiment configuration files and the built-in system registry.

A configuration is one JSON object::

    {
      "system": {"name": "wolbachia", "preset": "default"},
      "cone": {"orthant": [-1, -1, 1, 1]},
      "reduction": {"constant": [500.0]},
      "desirable": {"state_lower": [...], "state_upper": [...],
                    "control_lower": [...], "control_upper": [...]},
      "grid": {"lower": [...], "upper": [...], "shape": [...],
               "absorbing": [[0, "lower"], ...]},
      "integration": {"dt": 0.05, "max_iter": 500, "T": 10.0},
      "controls": [[0.0], [250.0], [500.0]],
      "sampling": {"state_lower": [...], "state_upper": [...], "n_samples": 10000},
      "seed": 0
    }

``null`` stands for an unbounded side in ``desirable``. For the Wolbachia
system every block except ``system`` may be omitted and is then taken from
the preset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cone import ConeError, ConvexCone
from .dynamics import Box, ControlledSystem, Finite, Reduction, SamplingPlan, everywhere, nonnegative
from .viability import DesirableSet, GridSpec


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


# -- registry -------------------------------------------------------------------

def _control_set(params: dict, m: int):
    if "controls" in params:
        return Finite(params["controls"])
    lo = params.get("control_lower", [-1.0] * m)
    hi = params.get("control_upper", [1.0] * m)
    return Box(lo, hi)


def _domain(params: dict, default):
    name = params.get("domain")
    if name is None:
        return default
    return {"nonnegative": nonnegative, "everywhere": everywhere}[name]


def build_linear(params: dict) -> ControlledSystem:
    """``x' = A x + B u + c``."""
    A = np.atleast_2d(np.asarray(params["A"], dtype=float))
    n = A.shape[0]
    B = np.atleast_2d(np.asarray(params.get("B", np.zeros((n, 1))), dtype=float))
    c = np.asarray(params.get("c", np.zeros(n)), dtype=float)
    m = B.shape[1]
    return ControlledSystem(n, m, lambda x, u: x @ A.T + u @ B.T + c, _control_set(params, m),
                            _domain(params, everywhere), name="linear")


def build_integrator(params: dict) -> ControlledSystem:
    """``x' = u``, one control per state coordinate."""
    n = int(params.get("n", 1))
    return ControlledSystem(n, n, lambda x, u: np.broadcast_to(u, np.broadcast_shapes(x.shape, u.shape)).copy(),
                            _control_set(params, n), _domain(params, everywhere), name="integrator")


def build_decay(params: dict) -> ControlledSystem:
    """``x' = -rate x + u``."""
    n = int(params.get("n", 1))
    rate = float(params.get("rate", 1.0))
    return ControlledSystem(n, n, lambda x, u: -rate * x + u, _control_set(params, n),
                            _domain(params, everywhere), name="decay")


def build_wolbachia(params: dict) -> ControlledSystem:
    from .wolbachia import WolbachiaParams, preset_case, wolbachia_system

    if "params" in params:
        return wolbachia_system(WolbachiaParams(**params["params"]))
    p, _, _, _ = preset_case(params.get("preset", "default"))
    return wolbachia_system(p)


SYSTEMS = {
    "linear": build_linear,
    "integrator": build_integrator,
    "decay": build_decay,
    "wolbachia": build_wolbachia,
}


def build_reduction(spec) -> Reduction:
    if spec is None or spec == "identity" or (isinstance(spec, dict) and "identity" in spec):
        return Reduction.identity()
    if isinstance(spec, dict) and "constant" in spec:
        return Reduction.constant(spec["constant"])
    if isinstance(spec, dict) and "scale_clip" in spec:
        body = spec["scale_clip"]
        factor = float(body["factor"])
        lo = np.asarray(body["lower"], dtype=float)
        hi = np.asarray(body["upper"], dtype=float)
        return Reduction(lambda u: np.clip(factor * u, lo, hi), name=f"scale_clip({factor})")
    raise ConfigError(f"unknown reduction spec {spec!r}")


# -- configuration --------------------------------------------------------------

@dataclass
class ExperimentConfig:
    system: ControlledSystem
    cone: ConvexCone | None = None
    reduction: Reduction = field(default_factory=Reduction.identity)
    desirable: DesirableSet | None = None
    grid: GridSpec | None = None
    dt: float = 0.05
    T: float | None = None
    max_iter: int = 500
    controls: np.ndarray | None = None
    sampling: SamplingPlan | None = None
    seed: int = 0
    raw: dict = field(default_factory=dict)


def _wolbachia_defaults(raw: dict) -> dict:
    from .wolbachia import build_case_study, WolbachiaParams, preset_case

    sys_spec = raw["system"]
    p, thr, grid, data = preset_case(sys_spec.get("preset", "default"))
    if "params" in sys_spec:
        p = WolbachiaParams(**sys_spec["params"])
    case = build_case_study(p, thr)
    defaults = {
        "cone": case.cone.to_spec(),
        "reduction": {"constant": [p.u_sharp]},
        "desirable": case.desirable.to_spec(),
        "grid": grid.to_spec(),
        "integration": {"dt": data["dt"], "max_iter": data["max_iter"]},
        "controls": [[0.0], [0.5 * p.u_sharp], [p.u_sharp]],
        "sampling": {"state_lower": [1.0] * 4, "state_upper": list(grid.upper)},
    }
    return {**defaults, **raw}


def parse_config(raw: dict, seed: int | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict) or "system" not in raw:
        raise ConfigError("configuration must be an object with a 'system' entry")
    sys_spec = raw["system"]
    name = sys_spec.get("name") if isinstance(sys_spec, dict) else None
    if name not in SYSTEMS:
        raise ConfigError(f"unknown system {name!r}; known: {sorted(SYSTEMS)}")
    if name == "wolbachia":
        raw = _wolbachia_defaults(raw)
    try:
        system = SYSTEMS[name](sys_spec.get("params", {}) if name != "wolbachia" else sys_spec)
        cone = ConvexCone.from_spec(raw["cone"]) if raw.get("cone") is not None else None
        reduction = build_reduction(raw.get("reduction"))
        desirable = DesirableSet.from_spec(raw["desirable"]) if raw.get("desirable") else None
        grid = GridSpec.from_spec(raw["grid"]) if raw.get("grid") else None
        integ = raw.get("integration", {})
        controls = raw.get("controls")
        controls = None if controls is None else np.atleast_2d(np.asarray(controls, dtype=float))
        seed = int(raw.get("seed", 0)) if seed is None else int(seed)
        sampling = None
        if raw.get("sampling"):
            s = raw["sampling"]
            sampling = SamplingPlan(tuple(s["state_lower"]), tuple(s["state_upper"]),
                                    int(s.get("n_samples", 10_000)), seed)
    except (KeyError, TypeError, ValueError, ConeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc

    n = system.n
    if cone is not None and cone.n != n:
        raise ConfigError(f"cone dimension {cone.n} does not match state dimension {n}")
    if desirable is not None and desirable.state_lower.size != n:
        raise ConfigError("desirable set dimension does not match the system")
    if grid is not None and grid.ndim != n:
        raise ConfigError("grid dimension does not match the system")
    if controls is not None and controls.shape[1] != system.m:
        raise ConfigError("control samples do not match the control dimension")
    if sampling is not None and len(sampling.state_lower) != n:
        raise ConfigError("sampling box does not match the system")
    return ExperimentConfig(system, cone, reduction, desirable, grid,
                            dt=float(integ.get("dt", 0.05)), T=integ.get("T"),
                            max_iter=int(integ.get("max_iter", 500)), controls=controls,
                            sampling=sampling, seed=seed, raw=raw)


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(raw, seed)
