"""JSON experiment configuration: strict parsing, defaults and rule checks.

Schema (every key optional; unknown keys are rejected)::

    {
      "dgp": "A",
      "kernel": {"w": "epanechnikov" | [..per axis..], "k": "epanechnikov"},
      "n": [500, 2000, 8000, 32000],
      "bandwidth": {"c": 1.0, "gamma": 0.2, "rho": 1.0}      # h1 = c n^-gamma, h2 = rho h1
                 | {"h1": 0.2, "h2": 0.2},                    # fixed bandwidths
      "replications": 200,
      "grid": {"m_y": 201, "m_x": 51},
      "seed": 20240611,
      "estimator": "smoothed" | "unsmoothed" | "both",
      "y_box": [lo, hi],
      "delta": {"c": 1.0, "power": 0.5, "points": 2},
      "h_values": [0.2, 0.1, 0.05],
      "ridge": 0.0,
      "clamp": false
    }
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

from .dgp import get_dgp
from .kernels import FAMILIES, KernelSpec, make_spec

__all__ = ["ConfigError", "ConfigWarning", "ExperimentConfig", "load_config",
           "parse_config", "COMMANDS", "STATISTICAL"]

COMMANDS = ("estimate", "bias", "rates", "alr", "equicont", "clt")
STATISTICAL = ("rates", "alr", "equicont", "clt")

_TOP = {"dgp", "kernel", "n", "bandwidth", "replications", "grid", "seed", "estimator",
        "y_box", "delta", "h_values", "ridge", "clamp"}
_SUB = {
    "kernel": {"w", "k"},
    "bandwidth": {"c", "gamma", "rho", "h1", "h2"},
    "grid": {"m_y", "m_x"},
    "delta": {"c", "power", "points"},
}


class ConfigError(ValueError):
    """One or more configuration fields are invalid; ``errors`` lists them all."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConfigWarning(UserWarning):
    """A bandwidth rule violates a side condition of the targeted result."""


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: str = "A"
    kernel_w: tuple = ("epanechnikov",)
    kernel_k: str = "epanechnikov"
    n: tuple = (500, 2000, 8000, 32000)
    c: float = 1.0
    gamma: float = 0.2
    rho: float = 1.0
    h1: float | None = None
    h2: float | None = None
    replications: int = 200
    m_y: int = 201
    m_x: int = 51
    seed: int = 20240611
    estimator: str = "smoothed"
    y_box: tuple | None = None
    delta_c: float = 1.0
    delta_power: float = 0.5
    delta_points: int = 2
    h_values: tuple = (0.2, 0.1, 0.05)
    ridge: float = 0.0
    clamp: bool = False
    command: str | None = field(default=None, compare=False)

    @property
    def d(self) -> int:
        return get_dgp(self.dgp).d

    def kernel_spec(self) -> KernelSpec:
        return make_spec(list(self.kernel_w), self.kernel_k, d=len(self.kernel_w))

    def bandwidths(self, n: int):
        """``(h1, h2)`` for sample size ``n``."""
        h1 = self.h1 if self.h1 is not None else self.c * float(n) ** (-self.gamma)
        h2 = self.h2 if self.h2 is not None else self.rho * h1
        return h1, h2

    def delta(self, n: int) -> float:
        return self.delta_c * float(n) ** (-self.delta_power)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("command")
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def parse_config(raw: dict, command: str | None = None) -> ExperimentConfig:
    """Validate a decoded JSON object; raises :class:`ConfigError` listing
    every violation and emits :class:`ConfigWarning` for rule violations."""
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a JSON object"])
    for key in sorted(set(raw) - _TOP):
        errors.append(f"unknown key {key!r}")
    for block, allowed in _SUB.items():
        sub = raw.get(block)
        if sub is None:
            continue
        if block == "kernel" and isinstance(sub, str):
            continue
        if not isinstance(sub, dict):
            errors.append(f"{block}: expected an object")
            continue
        for key in sorted(set(sub) - allowed):
            errors.append(f"unknown key {block}.{key!r}")

    kw = {}
    dgp_id = raw.get("dgp", "A")
    try:
        d = get_dgp(str(dgp_id)).d
        kw["dgp"] = str(dgp_id).upper()
    except ValueError as exc:
        errors.append(f"dgp: {exc}")
        d = 1

    kern = raw.get("kernel", {})
    if isinstance(kern, str):
        kern = {"w": kern, "k": kern}
    if isinstance(kern, dict):
        w = kern.get("w", "epanechnikov")
        w = [w] * d if isinstance(w, str) else list(w)
        k = kern.get("k", "epanechnikov")
        for fam in w + [k]:
            if fam not in FAMILIES:
                errors.append(f"kernel: unknown family {fam!r} (choose from {FAMILIES})")
        if len(w) != d:
            errors.append(f"kernel.w: {len(w)} axis families given for d={d}")
        kw["kernel_w"] = tuple(w)
        kw["kernel_k"] = k

    if "n" in raw:
        n = raw["n"]
        n = [n] if not isinstance(n, list) else n
        if not n or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in n):
            errors.append("n: expected a positive integer or a non-empty list of them")
        else:
            kw["n"] = tuple(n)
    sched = kw.get("n", ExperimentConfig.n)
    if command in ("rates", "alr", "equicont") and "n" in kw:
        if any(b <= a for a, b in zip(sched, sched[1:])):
            errors.append("n: schedule must be strictly increasing")
        need = 4 if command == "rates" else 2
        if len(sched) < need:
            errors.append(f"n: the {command} experiment needs at least {need} sample sizes")

    bw = raw.get("bandwidth", {})
    if isinstance(bw, dict):
        for key in ("c", "rho", "h1", "h2"):
            if key in bw:
                if not _is_num(bw[key]) or bw[key] <= 0:
                    errors.append(f"bandwidth.{key}: must be a positive number, got {bw[key]!r}")
                else:
                    kw[key] = float(bw[key])
        if "gamma" in bw:
            g = bw["gamma"]
            if not _is_num(g) or not (0.0 < g < 1.0 / d):
                errors.append(f"bandwidth.gamma: must lie in (0, 1/d) = (0, {1.0 / d:g}), got {g!r}")
            else:
                kw["gamma"] = float(g)

    if "replications" in raw:
        r = raw["replications"]
        if not isinstance(r, int) or isinstance(r, bool) or r < 1:
            errors.append(f"replications: must be a positive integer, got {r!r}")
        else:
            kw["replications"] = r

    grid = raw.get("grid", {})
    if isinstance(grid, dict):
        for key in ("m_y", "m_x"):
            if key in grid:
                v = grid[key]
                if not isinstance(v, int) or isinstance(v, bool) or v < 2:
                    errors.append(f"grid.{key}: must be an integer >= 2, got {v!r}")
                else:
                    kw[key] = v

    if "seed" in raw:
        s = raw["seed"]
        if not isinstance(s, int) or isinstance(s, bool) or not (0 <= s < 2 ** 64):
            errors.append(f"seed: must be an unsigned 64-bit integer, got {s!r}")
        else:
            kw["seed"] = s

    if "estimator" in raw:
        e = raw["estimator"]
        if e not in ("smoothed", "unsmoothed", "both"):
            errors.append(f"estimator: expected smoothed, unsmoothed or both, got {e!r}")
        else:
            kw["estimator"] = e

    if "y_box" in raw:
        yb = raw["y_box"]
        if (not isinstance(yb, list) or len(yb) != 2 or not all(_is_num(v) for v in yb)
                or not yb[0] < yb[1]):
            errors.append(f"y_box: expected [lo, hi] with lo < hi, got {yb!r}")
        else:
            kw["y_box"] = (float(yb[0]), float(yb[1]))

    dl = raw.get("delta", {})
    if isinstance(dl, dict):
        if "c" in dl:
            if not _is_num(dl["c"]) or dl["c"] < 0:
                errors.append(f"delta.c: must be a non-negative number, got {dl['c']!r}")
            else:
                kw["delta_c"] = float(dl["c"])
        if "power" in dl:
            if not _is_num(dl["power"]) or dl["power"] <= 0:
                errors.append(f"delta.power: must be positive (delta_n = o(1)), got {dl['power']!r}")
            else:
                kw["delta_power"] = float(dl["power"])
        if "points" in dl:
            p = dl["points"]
            if not isinstance(p, int) or isinstance(p, bool) or p < 1:
                errors.append(f"delta.points: must be a positive integer, got {p!r}")
            else:
                kw["delta_points"] = p

    if "h_values" in raw:
        hv = raw["h_values"]
        if (not isinstance(hv, list) or len(hv) < 2
                or not all(_is_num(v) and v > 0 for v in hv)):
            errors.append(f"h_values: expected a list of >= 2 positive numbers, got {hv!r}")
        else:
            kw["h_values"] = tuple(float(v) for v in hv)

    if "ridge" in raw:
        if not _is_num(raw["ridge"]) or raw["ridge"] < 0:
            errors.append(f"ridge: must be a non-negative number, got {raw['ridge']!r}")
        else:
            kw["ridge"] = float(raw["ridge"])
    if "clamp" in raw:
        if not isinstance(raw["clamp"], bool):
            errors.append(f"clamp: must be true or false, got {raw['clamp']!r}")
        else:
            kw["clamp"] = raw["clamp"]

    if command == "clt" and d != 1:
        errors.append(f"dgp: the clt experiment needs a scalar covariate, DGP has d={d}")

    if errors:
        raise ConfigError(errors)

    cfg = ExperimentConfig(command=command, **kw)
    for msg in side_condition_warnings(cfg, command):
        warnings.warn(msg, ConfigWarning, stacklevel=2)
    return cfg


def side_condition_warnings(cfg: ExperimentConfig, command: str | None) -> list:
    """Rate conditions of the targeted result that the bandwidth rule breaks."""
    out = []
    d = len(cfg.kernel_w)
    rule = cfg.h1 is None
    g = cfg.gamma
    if command in STATISTICAL and cfg.replications < 100:
        out.append(f"replications={cfg.replications} < 100: statistical summaries are unreliable")
    if command in ("rates", "alr", "equicont", "clt") and not rule:
        out.append("fixed h1 does not shrink with n: the bias term never vanishes")
    if command in ("alr", "equicont"):
        if rule and g < 1.0 / (d + 4):
            out.append(f"gamma={g:g} < 1/(d+4): 'n h₁^(d+4)/|log h₁| bounded' fails")
        if cfg.h2 is not None and rule:
            out.append("fixed h2 with shrinking h1 violates 'h₂ = O(h₁)'")
    if command == "clt" and rule:
        if g >= 0.5:
            out.append(f"gamma={g:g} >= 1/2: '√n h₁/|log h₁| → ∞' fails")
        if g <= 0.25:
            out.append(f"gamma={g:g} <= 1/4: '√n h₁² → 0' fails")
        if cfg.h2 is not None:
            out.append("fixed h2 with shrinking h1 violates 'h₂ = O(h₁)'")
    return out


def load_config(path, command: str | None = None) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None
    return parse_config(raw, command)
