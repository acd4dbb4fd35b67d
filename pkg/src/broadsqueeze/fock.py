"""Photon-number distribution algebra.

Everything here works on finite probability vectors ``P_n, n = 0..M`` with
per-bin 1-sigma uncertainties. Bins are treated as independent Poisson
variables; covariances between bins are ignored throughout.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import PhysicsDomainError, UndefinedQuantityError

DEFAULT_CUTOFF = 20


@dataclass(frozen=True)
class CountHistogram:
    """Integer tally of detection events per photon number."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a non-empty 1-D sequence")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(np.mod(counts, 1) == 0):
                raise ValueError("counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total_events(self) -> int:
        return int(self.counts.sum())

    @property
    def max_n(self) -> int:
        return self.counts.size - 1

    @classmethod
    def from_events(cls, per_event: np.ndarray, min_length: int = 1) -> "CountHistogram":
        per_event = np.asarray(per_event)
        return cls(np.bincount(per_event, minlength=min_length))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "count"])
        for n, c in enumerate(self.counts):
            writer.writerow([n, int(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountHistogram":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty count histogram CSV")
        n = np.array([int(r["n"]) for r in rows])
        c = np.array([int(r["count"]) for r in rows])
        counts = np.zeros(n.max() + 1, dtype=np.int64)
        counts[n] = c
        return cls(counts)


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number probabilities ``P_n`` for ``n = 0..cutoff`` with 1-sigma errors.

    A loss-compensated distribution (``compensated=True``) may contain
    negative entries and need not sum to one; it is never clamped.
    """

    probs: np.ndarray
    sigmas: np.ndarray = None
    compensated: bool = False
    total_events: int | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D sequence")
        if self.sigmas is None:
            sigmas = np.zeros_like(probs)
        else:
            sigmas = np.array(self.sigmas, dtype=float)
        if sigmas.shape != probs.shape:
            raise ValueError("sigmas must match probs in shape")
        if np.any(sigmas < 0):
            raise ValueError("sigmas must be non-negative")
        if not self.compensated:
            if np.any(probs < 0) or np.any(probs > 1):
                raise ValueError("uncompensated probabilities must lie in [0, 1]")
            if probs.sum() > 1 + 1e-9:
                raise ValueError(f"probabilities sum to {probs.sum()!r} > 1")
        probs.setflags(write=False)
        sigmas.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    @property
    def tail_mass(self) -> float:
        """``1 - sum(P_n)``; negative for compensated distributions summing above one."""
        return float(1.0 - self.probs.sum())

    def padded(self, cutoff: int) -> "PhotonDistribution":
        """Copy zero-padded (never truncated) to ``cutoff``."""
        if cutoff < self.cutoff:
            raise ValueError("padded() cannot truncate")
        extra = cutoff - self.cutoff
        return PhotonDistribution(
            np.pad(self.probs, (0, extra)),
            np.pad(self.sigmas, (0, extra)),
            self.compensated,
            self.total_events,
        )

    def to_dict(self) -> dict:
        out = {
            "probs": [float(p) for p in self.probs],
            "sigmas": [float(s) for s in self.sigmas],
            "cutoff": self.cutoff,
            "compensated": bool(self.compensated),
        }
        if self.total_events is not None:
            out["total_events"] = int(self.total_events)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "PhotonDistribution":
        probs = obj["probs"]
        if len(probs) != obj.get("cutoff", len(probs) - 1) + 1:
            raise ValueError("cutoff does not match the length of probs")
        return cls(probs, obj.get("sigmas"), bool(obj.get("compensated", False)), obj.get("total_events"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PhotonDistribution":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "P_n", "sigma"])
        for n, (p, s) in enumerate(zip(self.probs, self.sigmas)):
            writer.writerow([n, repr(float(p)), repr(float(s))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, compensated: bool = False) -> "PhotonDistribution":
        rows = list(csv.DictReader(io.StringIO(text)))
        probs = [float(r["P_n"]) for r in rows]
        sigmas = [float(r["sigma"]) for r in rows]
        return cls(probs, sigmas, compensated)


class Estimate(NamedTuple):
    value: float
    sigma: float


class KlyshkoFigure(NamedTuple):
    n: int
    value: float
    sigma: float
    defined: bool


def from_counts(h: CountHistogram) -> PhotonDistribution:
    """Relative frequencies with independent Poisson errors ``sqrt(c_n)/N``."""
    total = h.total_events
    if total <= 0:
        raise PhysicsDomainError("histogram has zero total events")
    counts = h.counts.astype(float)
    return PhotonDistribution(counts / total, np.sqrt(counts) / total, False, total)


def _propagate(grad: np.ndarray, sigmas: np.ndarray) -> float:
    return float(np.sqrt(np.sum((grad * sigmas) ** 2)))


def mean_photon(d: PhotonDistribution) -> Estimate:
    n = np.arange(d.probs.size)
    return Estimate(float(n @ d.probs), _propagate(n.astype(float), d.sigmas))


def factorial_weights(size: int, m: int) -> np.ndarray:
    """``n!/(n-m)!`` for ``n = 0..size-1`` (zero for ``n < m``)."""
    n = np.arange(size, dtype=float)
    w = np.ones(size)
    for j in range(m):
        w *= n - j
    w[: min(m, size)] = 0.0
    return w


def g_factorial(d: PhotonDistribution, m: int) -> Estimate:
    """Normalised factorial moment ``g^(m) = n^(m) / <n>^m``.

    The error propagates each bin's sigma through both numerator and
    denominator (bins independent, no covariance terms).
    """
    if m not in (2, 3):
        raise ValueError("only m = 2 or 3 is supported")
    n = np.arange(d.probs.size, dtype=float)
    mean = float(n @ d.probs)
    if mean <= 0:
        raise UndefinedQuantityError("g^(m) undefined for zero mean photon number")
    w = factorial_weights(d.probs.size, m)
    fm = float(w @ d.probs)
    g = fm / mean**m
    grad = w / mean**m - m * fm * n / mean ** (m + 1)
    return Estimate(g, _propagate(grad, d.sigmas))


def fano(d: PhotonDistribution) -> Estimate:
    n = np.arange(d.probs.size, dtype=float)
    m1 = float(n @ d.probs)
    if m1 <= 0:
        raise UndefinedQuantityError("Fano factor undefined for zero mean photon number")
    m2 = float((n * n) @ d.probs)
    var = m2 - m1 * m1
    grad = (n * n - 2 * m1 * n) / m1 - var * n / m1**2
    return Estimate(var / m1, _propagate(grad, d.sigmas))


def klyshko_figures(d: PhotonDistribution, n_max: int) -> list[KlyshkoFigure]:
    """``K_n = (n+1) P_{n-1} P_{n+1} / (n P_n^2)`` for ``n = 1..n_max``.

    ``K_n < 1`` witnesses nonclassical statistics. Entries with ``P_n = 0``
    are returned with ``defined=False`` and a NaN value.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_max + 1 > d.cutoff:
        raise ValueError(f"n_max + 1 = {n_max + 1} exceeds cutoff {d.cutoff}")
    p, s = d.probs, d.sigmas
    out = []
    for n in range(1, n_max + 1):
        if p[n] == 0:
            out.append(KlyshkoFigure(n, float("nan"), float("nan"), False))
            continue
        c = (n + 1) / n
        k = c * p[n - 1] * p[n + 1] / p[n] ** 2
        dkm = c * p[n + 1] / p[n] ** 2
        dkp = c * p[n - 1] / p[n] ** 2
        dkn = -2 * k / p[n]
        sig = np.sqrt((dkm * s[n - 1]) ** 2 + (dkp * s[n + 1]) ** 2 + (dkn * s[n]) ** 2)
        out.append(KlyshkoFigure(n, float(k), float(sig), True))
    return out


def estimate_efficiency(d: PhotonDistribution) -> Estimate:
    """Overall detection efficiency from ``x = 2 P_2 / P_1`` as ``x / (1 + x)``.

    Only meaningful under weak pumping, where two-photon events dominate the
    source and one- and two-photon detections come from single pairs.
    """
    if d.cutoff < 2:
        raise ValueError("need P_1 and P_2")
    p1, p2 = d.probs[1], d.probs[2]
    s1, s2 = d.sigmas[1], d.sigmas[2]
    if p1 == 0:
        raise UndefinedQuantityError("P_1 = 0: efficiency estimator undefined")
    denom = p1 + 2 * p2
    eta = 2 * p2 / denom
    sig = np.hypot(2 * p1 / denom**2 * s2, 2 * p2 / denom**2 * s1)
    return Estimate(float(eta), float(sig))


def loss_matrix(eta: float, size: int) -> np.ndarray:
    """Binomial loss channel ``L[m, k] = C(k, m) eta^m (1-eta)^(k-m)``.

    Columns are built by the pmf recurrence
    ``b_k(m) = eta b_{k-1}(m-1) + (1-eta) b_{k-1}(m)``, which stays accurate
    at large k where factorial-based coefficients overflow.
    """
    if not 0.0 <= eta <= 1.0:
        raise PhysicsDomainError(f"efficiency {eta!r} outside [0, 1]")
    mat = np.zeros((size, size))
    col = np.zeros(size)
    col[0] = 1.0
    mat[:, 0] = col
    for k in range(1, size):
        nxt = (1.0 - eta) * col
        nxt[1:] += eta * col[:-1]
        col = nxt
        mat[:, k] = col
    return mat


def apply_loss(d: PhotonDistribution, eta: float) -> PhotonDistribution:
    """Push a distribution through a beam splitter of transmission ``eta``."""
    mat = loss_matrix(eta, d.probs.size)
    probs = mat @ d.probs
    sigmas = np.sqrt((mat**2) @ (d.sigmas**2))
    if not d.compensated:
        probs = np.clip(probs, 0.0, 1.0)
    return PhotonDistribution(probs, sigmas, d.compensated, d.total_events)


def compensate_loss(d: PhotonDistribution, eta: float, M: int = DEFAULT_CUTOFF) -> PhotonDistribution:
    """Invert the binomial loss relation for ``p_k, k = 0..M``.

    Solves the upper-triangular system by back-substitution. Negative entries
    are kept; the result is flagged ``compensated``.
    """
    if not 0.0 < eta <= 1.0:
        raise PhysicsDomainError(f"efficiency {eta!r} must be in (0, 1] for inversion")
    support = np.nonzero(d.probs)[0]
    top = int(support.max()) if support.size else 0
    if top > M:
        raise PhysicsDomainError(f"observed support reaches n={top} > cutoff M={M}")
    probs = np.zeros(M + 1)
    sig = np.zeros(M + 1)
    k = min(d.probs.size, M + 1)
    probs[:k] = d.probs[:k]
    sig[:k] = d.sigmas[:k]
    mat = loss_matrix(eta, M + 1)
    p = solve_triangular(mat, probs, lower=False)
    inv = solve_triangular(mat, np.eye(M + 1), lower=False)
    sigmas = np.sqrt((inv**2) @ (sig**2))
    return PhotonDistribution(p, sigmas, True, d.total_events)


def poisson_distribution(lam: float, cutoff: int) -> PhotonDistribution:
    probs = np.zeros(cutoff + 1)
    probs[0] = np.exp(-lam)
    for n in range(1, cutoff + 1):
        probs[n] = probs[n - 1] * lam / n
    return PhotonDistribution(probs)


def thermal_distribution(q: float, cutoff: int) -> PhotonDistribution:
    """Geometric law ``(1-q) q^n``."""
    return PhotonDistribution((1 - q) * q ** np.arange(cutoff + 1))


def as_distribution(probs: Sequence[float]) -> PhotonDistribution:
    return PhotonDistribution(np.asarray(probs, dtype=float))
