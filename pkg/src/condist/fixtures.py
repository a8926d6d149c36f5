"""Oracle fixture values: generation, storage and comparison.

The checked-in file ``data/oracle_fixtures.json`` holds pseudo-true
intercepts, integrated CDFs, limit variances and eigenvalue bands computed
by the quadrature oracle.  :func:`generate` recomputes them from scratch and
:func:`compare` checks a fresh run against the stored copy within the
tolerances recorded next to each group.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from . import oracle
from .dgp import get_dgp
from .kernels import make_spec
from .llr import Bandwidths

__all__ = ["TOLERANCES", "generate", "compare", "load_checked_in", "FIXTURE_PATH"]

FIXTURE_PATH = Path(__file__).with_name("data") / "oracle_fixtures.json"

# Absolute tolerances per group; a few orders above the quadrature targets.
TOLERANCES = {"beta_bar0": 1e-9, "theta": 1e-8, "V": 1e-8, "eigen_band": 1e-9}

# (dgp, y, x, h1, h2)
_BETA_CASES = [
    ("A", 0.25, [0.5], 0.1, 0.1),
    ("A", 0.25, [0.5], 0.2, 0.2),
    ("A", -1.0, [0.0], 0.2, 0.2),
    ("A", 2.0, [1.0], 0.15, 0.1),
    ("A", 0.5, [0.05], 0.1, 0.05),
    ("B", 1.0, [0.5, 0.5], 0.2, 0.2),
    ("B", 0.3, [0.0, 0.9], 0.25, 0.15),
    ("C", 0.9, [0.3], 0.1, 0.1),
    ("C", 0.2, [0.0], 0.2, 0.1),
    ("C", 1.5, [0.95], 0.1, 0.05),
]

_THETA_CASES = [("A", [-4.0, 5.0]), ("A", [-6.0, 7.0]), ("B", [-6.0, 8.0]),
                ("C", [0.0, 2.0]), ("U", [0.0, 1.0])]

_V_CASES = [("A", [-6.0, 7.0]), ("A", [-4.0, 5.0]), ("C", [0.0, 2.0]), ("U", [0.0, 1.0])]

_BAND_CASES = [("A", (0.05, 0.1, 0.3)), ("C", (0.05, 0.1, 0.3))]


def generate(kernel: str = "epanechnikov") -> dict:
    """Recompute every fixture value with the quadrature oracle."""
    out = {"kernel": kernel, "tolerances": dict(TOLERANCES),
           "beta_bar0": [], "theta": [], "V": [], "eigen_band": []}
    for dgp_id, y, x, h1, h2 in _BETA_CASES:
        dgp = get_dgp(dgp_id)
        spec = make_spec(kernel, kernel, d=dgp.d)
        pt = oracle.pseudo_true(y, x, Bandwidths(h1, h2), dgp, spec)
        out["beta_bar0"].append({"dgp": dgp_id, "y": y, "x": x, "h1": h1, "h2": h2,
                                 "value": float(pt.beta0)})
    for dgp_id, yr in _THETA_CASES:
        out["theta"].append({"dgp": dgp_id, "y_range": yr,
                             "value": oracle.theta(get_dgp(dgp_id), tuple(yr))})
    for dgp_id, yr in _V_CASES:
        out["V"].append({"dgp": dgp_id, "y_range": yr,
                         "value": oracle.clt_variance(get_dgp(dgp_id), tuple(yr))})
    for dgp_id, hs in _BAND_CASES:
        dgp = get_dgp(dgp_id)
        band = oracle.eigenvalue_band(dgp, make_spec(kernel, kernel, d=dgp.d), hs)
        out["eigen_band"].append({"dgp": dgp_id, "h_values": list(hs), "m": 101,
                                  "eig_min": band["eig_min"], "eig_max": band["eig_max"],
                                  "C": band["C"]})
    return out


def load_checked_in() -> dict:
    text = resources.files("condist").joinpath("data/oracle_fixtures.json").read_text("utf-8")
    return json.loads(text)


def compare(fresh: dict, stored: dict) -> list:
    """Mismatch messages (empty when every value agrees within tolerance)."""
    problems = []
    for group, tol in TOLERANCES.items():
        a, b = fresh.get(group, []), stored.get(group, [])
        if len(a) != len(b):
            problems.append(f"{group}: {len(a)} fresh entries vs {len(b)} stored")
            continue
        keys = ("eig_min", "eig_max") if group == "eigen_band" else ("value",)
        for k, (ea, eb) in enumerate(zip(a, b)):
            for key in keys:
                diff = abs(ea[key] - eb[key])
                if not diff <= tol:
                    problems.append(f"{group}[{k}] ({ea['dgp']}) {key}: "
                                    f"{ea[key]!r} vs {eb[key]!r}, |diff|={diff:.3e} > {tol:g}")
    return problems


def dump(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
