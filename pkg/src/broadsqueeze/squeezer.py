"""Forward model of (multimode) squeezed vacuum photon statistics.

Squeezing parameters follow the convention in which a single mode of
strength ``r`` carries ``<n> = sinh(r)**2`` photons. A broadband source is a
set of independent squeezers ``r_k``; in the thermal parameterisation
``r_k = B * lambda_k`` with ``lambda_k = sqrt(1 - mu**2) * mu**k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import PhysicsDomainError, TruncationError, UndefinedQuantityError
from .fock import PhotonDistribution

DEFAULT_K_MAX = 40


class ThermalWeights(NamedTuple):
    weights: np.ndarray
    deficit: float


class ShapeFunctions(NamedTuple):
    L4: float
    L6: float
    S: float
    K: float


class CorrelationPair(NamedTuple):
    g2: float
    g3: float


@dataclass(frozen=True)
class SqueezerSpec:
    """Per-mode squeezing strengths, given explicitly or as a thermal ladder.

    Exactly one of ``r_list`` or the triple ``(mu, B, K_max)`` is used; build
    instances with :meth:`explicit` or :meth:`thermal`.
    """

    r_list: tuple[float, ...] | None = None
    mu: float | None = None
    B: float | None = None
    K_max: int = DEFAULT_K_MAX

    def __post_init__(self):
        if self.r_list is not None:
            if self.mu is not None or self.B is not None:
                raise ValueError("give either r_list or (mu, B), not both")
            r = tuple(float(x) for x in self.r_list)
            if not r:
                raise ValueError("r_list must not be empty")
            if any(x < 0 or not np.isfinite(x) for x in r):
                raise PhysicsDomainError("squeezing parameters must be finite and >= 0")
            object.__setattr__(self, "r_list", r)
        else:
            if self.mu is None or self.B is None:
                raise ValueError("thermal form needs both mu and B")
            if not 0.0 <= self.mu < 1.0:
                raise PhysicsDomainError(f"mu={self.mu!r} outside [0, 1)")
            if self.B < 0:
                raise PhysicsDomainError("optical gain B must be >= 0")
            if self.K_max < 0:
                raise ValueError("K_max must be >= 0")

    @classmethod
    def explicit(cls, r_list: Sequence[float]) -> "SqueezerSpec":
        return cls(r_list=tuple(r_list))

    @classmethod
    def thermal(cls, mu: float, B: float, K_max: int = DEFAULT_K_MAX) -> "SqueezerSpec":
        return cls(mu=float(mu), B=float(B), K_max=int(K_max))

    @property
    def is_thermal(self) -> bool:
        return self.r_list is None

    def r_values(self) -> np.ndarray:
        if self.r_list is not None:
            return np.array(self.r_list)
        return self.B * thermal_weights(self.mu, self.K_max).weights

    def to_dict(self) -> dict:
        if self.is_thermal:
            return {"mu": self.mu, "B": self.B, "K_max": self.K_max}
        return {"r_list": list(self.r_list)}

    @classmethod
    def from_dict(cls, obj: dict) -> "SqueezerSpec":
        if "r_list" in obj:
            return cls.explicit(obj["r_list"])
        return cls.thermal(obj["mu"], obj["B"], obj.get("K_max", DEFAULT_K_MAX))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SqueezerSpec":
        return cls.from_dict(json.loads(text))


def pair_distribution(r: float, max_pairs: int) -> np.ndarray:
    """Probability of ``j`` photon pairs, ``j = 0..max_pairs``, in one squeezed mode.

    ``p_j = (2j)! / (4^j (j!)^2) * tanh(r)^(2j) / cosh(r)``, evaluated by
    its term ratio to avoid factorials.
    """
    if r < 0:
        raise PhysicsDomainError("r must be >= 0")
    t2 = np.tanh(r) ** 2
    out = np.empty(max_pairs + 1)
    out[0] = 1.0 / np.cosh(r)
    for j in range(1, max_pairs + 1):
        out[j] = out[j - 1] * (2 * j - 1) / (2 * j) * t2
    return out


def single_mode_distribution(r: float, cutoff: int, tail_tol: float | None = 1e-6) -> PhotonDistribution:
    """Fock distribution of a single-mode squeezed vacuum; odd entries are exactly zero.

    Raises :class:`TruncationError` if more than ``tail_tol`` probability
    lies above ``cutoff`` (pass ``None`` to skip the check).
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    pairs = pair_distribution(r, cutoff // 2)
    probs = np.zeros(cutoff + 1)
    probs[0::2] = pairs
    tail = 1.0 - probs.sum()
    if tail_tol is not None and tail > tail_tol:
        raise TruncationError(f"cutoff {cutoff} leaves tail mass {tail:.3g} > {tail_tol:g} for r={r}")
    return PhotonDistribution(probs)


def thermal_weights(mu: float, K_max: int) -> ThermalWeights:
    """Normalised thermal mode weights for ``k = 0..K_max``.

    ``deficit = 1 - sum(lambda_k**2) = mu**(2*K_max + 2)`` is the weight
    discarded by truncating the ladder.
    """
    if not 0.0 <= mu < 1.0:
        raise PhysicsDomainError(f"mu={mu!r} outside [0, 1)")
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    k = np.arange(K_max + 1)
    lam = np.sqrt(1.0 - mu * mu) * mu**k
    return ThermalWeights(lam, float(mu ** (2 * K_max + 2)))


def multimode_distribution(spec: SqueezerSpec, cutoff: int) -> PhotonDistribution:
    """Total-photon distribution of independent squeezers, truncated at ``cutoff``.

    Per-mode pair distributions are convolved in mode order; the tail above
    ``cutoff`` is left as ``tail_mass`` of the result.
    """
    max_pairs = cutoff // 2
    total = np.zeros(max_pairs + 1)
    total[0] = 1.0
    for r in spec.r_values():
        if r == 0:
            continue
        total = np.convolve(total, pair_distribution(r, max_pairs))[: max_pairs + 1]
    probs = np.zeros(cutoff + 1)
    probs[0::2] = total
    return PhotonDistribution(probs)


def mean_photon_total(spec: SqueezerSpec) -> float:
    return float(np.sum(np.sinh(spec.r_values()) ** 2))


def g_multi_exact(spec: SqueezerSpec) -> CorrelationPair:
    """Exact ``g2``, ``g3`` of a product of independent squeezed vacua.

    Built from the per-mode occupation ``s_k = sinh(r_k)**2``; matches the
    factorial moments of :func:`multimode_distribution` up to truncation.
    """
    s = np.sinh(spec.r_values()) ** 2
    t1 = s.sum()
    if t1 <= 0:
        raise UndefinedQuantityError("all squeezing parameters are zero")
    t2 = np.sum(s**2)
    t3 = np.sum(s**3)
    g2 = 1 + 2 * t2 / t1**2 + 1 / t1
    g3 = 1 + 6 * t2 / t1**2 + 8 * t3 / t1**3 + 3 / t1 + 6 * t2 / t1**3
    return CorrelationPair(float(g2), float(g3))


def L4(mu: float) -> float:
    """``sum(lambda_k**4)`` of the infinite thermal ladder."""
    m2 = mu * mu
    return (1 - m2) / (1 + m2)


def L6(mu: float) -> float:
    """``sum(lambda_k**6)`` of the infinite thermal ladder."""
    m2 = mu * mu
    return (1 - m2) ** 2 / (1 + m2 + m2 * m2)


def g_multi_approx(mu: float, B: float) -> CorrelationPair:
    """Small-``r`` thermal-ladder correlation functions."""
    if not 0.0 <= mu < 1.0:
        raise PhysicsDomainError(f"mu={mu!r} outside [0, 1)")
    if B <= 0:
        raise PhysicsDomainError("B must be > 0")
    l4, l6 = L4(mu), L6(mu)
    g2 = 1 + 2 * l4 + 1 / B**2
    g3 = 1 + 6 * l4 + 8 * l6 + (3 + 6 * l4) / B**2
    return CorrelationPair(g2, g3)


def slope(mu: float) -> float:
    """Slope of g3 against g2 for a thermal ladder: ``3 + 6 L4(mu)``."""
    return 3 + 6 * L4(mu)


def intercept(mu: float) -> float:
    """Intercept of the g3-vs-g2 line: ``-2 - 6 L4 - 12 L4^2 + 8 L6``."""
    l4 = L4(mu)
    return -2 - 6 * l4 - 12 * l4 * l4 + 8 * L6(mu)


def effective_mode_number(mu: float) -> float:
    return 1.0 / L4(mu)


def thermal_shape_functions(mu: float) -> ShapeFunctions:
    if not 0.0 <= mu < 1.0:
        raise PhysicsDomainError(f"mu={mu!r} outside [0, 1)")
    l4 = L4(mu)
    return ShapeFunctions(l4, L6(mu), 3 + 6 * l4, 1 / l4)


def single_mode_reference(mean_n: float) -> CorrelationPair:
    """Single-mode squeezed vacuum: ``g2 = 3 + 1/<n>``, ``g3 = 15 + 9/<n>``."""
    if mean_n <= 0:
        raise PhysicsDomainError("mean photon number must be > 0")
    return CorrelationPair(3 + 1 / mean_n, 15 + 9 / mean_n)
