"""Recover the thermal mode structure from measured (g2, g3) pairs.

The pipeline is: weighted straight-line fit of g3 against g2, closed-form
inversion of the slope to ``mu``, then one optical gain ``B`` per point from
its g2. The g2 abscissa is treated as exact in the fit; errors-in-variables
are not modelled.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateSlopeError, PhysicsDomainError, UnphysicalSlopeError
from .squeezer import DEFAULT_K_MAX, L4, effective_mode_number, thermal_weights


@dataclass(frozen=True)
class CorrelationPoint:
    g2: float
    sigma_g2: float
    g3: float
    sigma_g3: float
    label: str = ""

    def __post_init__(self):
        if self.g2 < 1 or self.g3 < 1:
            warnings.warn(f"unphysical correlation point g2={self.g2}, g3={self.g3} (< 1)", stacklevel=3)

    def to_dict(self) -> dict:
        return {"g2": self.g2, "sigma_g2": self.sigma_g2, "g3": self.g3, "sigma_g3": self.sigma_g3, "label": self.label}


class SlopeFit(NamedTuple):
    S: float
    sigma_S: float
    intercept: float


class MuEstimate(NamedTuple):
    mu: float
    sigma_mu: float


@dataclass
class ModeReconstruction:
    mu: float
    sigma_mu: float
    B_per_point: list[float]
    r_matrix: list[np.ndarray]
    K: float
    K_low: float
    K_high: float
    labels: list[str] = field(default_factory=list)
    S: float = float("nan")
    sigma_S: float = float("nan")
    intercept: float = float("nan")

    @property
    def weights(self) -> np.ndarray:
        return thermal_weights(self.mu, len(self.r_matrix[0]) - 1).weights if self.r_matrix else np.array([])

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "sigma_mu": self.sigma_mu,
            "S": self.S,
            "sigma_S": self.sigma_S,
            "intercept": self.intercept,
            "B_per_point": list(self.B_per_point),
            "labels": list(self.labels),
            "r_matrix": [list(map(float, r)) for r in self.r_matrix],
            "K": self.K,
            "K_low": self.K_low,
            "K_high": self.K_high,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        """Columns ``k, lambda_k`` then one ``r_k`` column per input point."""
        labels = self.labels or [str(i) for i in range(len(self.r_matrix))]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "lambda_k"] + [f"r_k[{lab}]" for lab in labels])
        lam = self.weights
        for k in range(lam.size):
            writer.writerow([k, repr(float(lam[k]))] + [repr(float(r[k])) for r in self.r_matrix])
        return buf.getvalue()


def fit_slope(points: Sequence[CorrelationPoint]) -> SlopeFit:
    """Weighted least-squares line ``g3 = S g2 + c`` with weights ``1/sigma_g3**2``.

    The slope error is the parameter standard error for the stated sigmas.
    With exactly two points the line interpolates and ``sigma_S`` is NaN. If
    every ``sigma_g3`` is zero the fit is unweighted.
    """
    if len(points) < 2:
        raise PhysicsDomainError("need at least two correlation points")
    x = np.array([p.g2 for p in points], dtype=float)
    y = np.array([p.g3 for p in points], dtype=float)
    sy = np.array([p.sigma_g3 for p in points], dtype=float)
    if np.ptp(x) == 0:
        raise PhysicsDomainError("all g2 values coincide; slope is undetermined")
    if np.all(sy == 0):
        w = np.ones_like(x)
        known_sigma = False
    elif np.all(sy > 0):
        w = 1.0 / sy**2
        known_sigma = True
    else:
        raise PhysicsDomainError("sigma_g3 must be all positive or all zero")

    # centre the abscissa so the normal equations stay well conditioned
    sw = w.sum()
    xm = (w @ x) / sw
    ym = (w @ y) / sw
    dx = x - xm
    sxx = w @ dx**2
    S = (w @ (dx * (y - ym))) / sxx
    c = ym - S * xm
    if len(points) == 2:
        sig = float("nan")
    elif known_sigma:
        sig = float(np.sqrt(1.0 / sxx))
    else:
        resid = y - (S * x + c)
        sig = float(np.sqrt((resid @ resid) / (len(points) - 2) / sxx))
    return SlopeFit(float(S), sig, float(c))


def invert_slope_to_mu(S: float, sigma_S: float = 0.0) -> MuEstimate:
    """Closed-form ``mu`` from the slope: ``L4 = (S - 3)/6``, ``mu = sqrt((1 - L4)/(1 + L4))``."""
    if S <= 3:
        raise DegenerateSlopeError(f"slope S={S} <= 3 would need mu >= 1")
    if S > 9:
        raise UnphysicalSlopeError(f"slope S={S} > 9 is steeper than a single mode")
    l4 = (S - 3) / 6
    mu = float(np.sqrt((1 - l4) / (1 + l4)))
    if not np.isfinite(sigma_S) or sigma_S == 0:
        return MuEstimate(mu, float(sigma_S) if np.isfinite(sigma_S) else float("nan"))
    if mu == 0:
        return MuEstimate(mu, float("inf"))
    return MuEstimate(mu, float(sigma_S / (6 * mu * (1 + l4) ** 2)))


def solve_B(g2: float, mu: float) -> float:
    """Optical gain from one g2 value at known ``mu``."""
    rad = g2 - 1 - 2 * L4(mu)
    if rad <= 0:
        raise PhysicsDomainError(f"g2={g2} is inconsistent with mu={mu} (needs g2 > {1 + 2 * L4(mu):.6g})")
    return float(1 / np.sqrt(rad))


def _K_at(mu: float) -> float:
    if mu >= 1:
        return float("inf")
    return effective_mode_number(max(mu, 0.0))


def reconstruct_modes(points: Sequence[CorrelationPoint], K_max: int = DEFAULT_K_MAX) -> ModeReconstruction:
    fit = fit_slope(points)
    mu, sigma_mu = invert_slope_to_mu(fit.S, fit.sigma_S)
    lam = thermal_weights(mu, K_max).weights
    Bs = [solve_B(p.g2, mu) for p in points]
    K = _K_at(mu)
    if np.isfinite(sigma_mu):
        K_low, K_high = _K_at(mu - sigma_mu), _K_at(mu + sigma_mu)
    else:
        K_low = K_high = float("nan")
    return ModeReconstruction(
        mu=mu,
        sigma_mu=sigma_mu,
        B_per_point=Bs,
        r_matrix=[B * lam for B in Bs],
        K=K,
        K_low=K_low,
        K_high=K_high,
        labels=[p.label for p in points],
        S=fit.S,
        sigma_S=fit.sigma_S,
        intercept=fit.intercept,
    )


def points_from_csv(text: str) -> list[CorrelationPoint]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        CorrelationPoint(
            float(r["g2"]), float(r.get("sigma_g2") or 0.0), float(r["g3"]), float(r.get("sigma_g3") or 0.0), r.get("label", "")
        )
        for r in rows
    ]


def points_to_csv(points: Sequence[CorrelationPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "g2", "sigma_g2", "g3", "sigma_g3"])
    for p in points:
        writer.writerow([p.label] + [repr(float(v)) for v in (p.g2, p.sigma_g2, p.g3, p.sigma_g3)])
    return buf.getvalue()
