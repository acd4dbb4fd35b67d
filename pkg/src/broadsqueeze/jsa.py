"""Quasi-phase-matched SPDC spectra and Schmidt decomposition.

Collinear type-0 down-conversion in a periodically poled crystal: the joint
spectral amplitude is a Gaussian pump envelope in ``omega_s + omega_i``
times the phase-matching ``sinc(L * dk / 2)``. Frequencies are angular
frequencies in rad/s; wavelengths are in nm unless a name says otherwise.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import GridResolutionError, NonMonotoneWeightsWarning, PhysicsDomainError, SchmidtError

TWO_PI_C = 2 * np.pi * SPEED_OF_LIGHT


def omega_from_nm(lam_nm):
    return TWO_PI_C / (np.asarray(lam_nm, dtype=float) * 1e-9)


def nm_from_omega(omega):
    return TWO_PI_C / np.asarray(omega, dtype=float) * 1e9


@dataclass(frozen=True)
class SellmeierCoefficients:
    """``n**2 = A + sum B_i lam**2 / (lam**2 - C_i) + sum_j D_j lam**(2j)``.

    ``poles`` holds ``(B_i, C_i)`` pairs and ``polynomial`` holds ``D_1, D_2, ...``;
    ``lam`` is expressed in ``wavelength_unit`` ("um" or "nm").
    """

    A: float
    poles: tuple[tuple[float, float], ...] = ()
    polynomial: tuple[float, ...] = ()
    valid_range_nm: tuple[float, float] = (0.0, float("inf"))
    wavelength_unit: str = "um"
    name: str = ""

    def __post_init__(self):
        if self.wavelength_unit not in ("um", "nm"):
            raise ValueError("wavelength_unit must be 'um' or 'nm'")
        object.__setattr__(self, "poles", tuple((float(b), float(c)) for b, c in self.poles))
        object.__setattr__(self, "polynomial", tuple(float(d) for d in self.polynomial))
        lo, hi = self.valid_range_nm
        object.__setattr__(self, "valid_range_nm", (float(lo), float(hi)))

    @classmethod
    def from_dict(cls, obj: dict) -> "SellmeierCoefficients":
        return cls(
            A=obj["A"],
            poles=tuple(tuple(p) for p in obj.get("poles", ())),
            polynomial=tuple(obj.get("polynomial", ())),
            valid_range_nm=tuple(obj.get("valid_range_nm", (0.0, float("inf")))),
            wavelength_unit=obj.get("wavelength_unit", "um"),
            name=obj.get("name", ""),
        )

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "poles": [list(p) for p in self.poles],
            "polynomial": list(self.polynomial),
            "valid_range_nm": list(self.valid_range_nm),
            "wavelength_unit": self.wavelength_unit,
            "name": self.name,
        }

    @classmethod
    def load(cls, path: str | Path) -> "SellmeierCoefficients":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_sellmeier() -> SellmeierCoefficients:
    """Room-temperature KTP z-axis coefficients shipped with the package."""
    text = resources.files("broadsqueeze.data").joinpath("ktp_z_fradkin1999.json").read_text()
    return SellmeierCoefficients.from_dict(json.loads(text))


def refractive_index(coeffs: SellmeierCoefficients, lam_nm):
    lam_nm = np.asarray(lam_nm, dtype=float)
    lo, hi = coeffs.valid_range_nm
    if np.any(lam_nm < lo) or np.any(lam_nm > hi):
        raise PhysicsDomainError(
            f"wavelength {lam_nm.min():.1f}-{lam_nm.max():.1f} nm outside Sellmeier range {lo}-{hi} nm"
        )
    lam = lam_nm * 1e-3 if coeffs.wavelength_unit == "um" else lam_nm
    l2 = lam * lam
    n2 = np.full_like(l2, coeffs.A)
    for b, c in coeffs.poles:
        n2 = n2 + b * l2 / (l2 - c)
    for j, d in enumerate(coeffs.polynomial, start=1):
        n2 = n2 + d * l2**j
    return np.sqrt(n2)


@dataclass(frozen=True)
class CrystalSpec:
    length_m: float = 10e-3
    poling_period_m: float = 24.2e-6
    degeneracy_wavelength_nm: float = 1535.0

    def __post_init__(self):
        if min(self.length_m, self.poling_period_m, self.degeneracy_wavelength_nm) <= 0:
            raise ValueError("crystal parameters must be positive")

    @property
    def omega0(self) -> float:
        return float(omega_from_nm(self.degeneracy_wavelength_nm))


@dataclass(frozen=True)
class PumpSpec:
    """Gaussian pump amplitude ``exp(-(w_s + w_i - w_p)**2 / (2 sigma_omega**2))``."""

    center_wavelength_nm: float = 767.5
    sigma_omega: float = 3.4e10

    def __post_init__(self):
        if self.sigma_omega <= 0:
            raise ValueError("pump width must be positive")

    @property
    def omega_p(self) -> float:
        return float(omega_from_nm(self.center_wavelength_nm))


@dataclass(frozen=True)
class FrequencyGrid:
    omega_min: float
    omega_max: float
    n: int

    def __post_init__(self):
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError("need 0 < omega_min < omega_max")
        if self.n < 2:
            raise ValueError("grid needs at least two points")

    @classmethod
    def symmetric(cls, center_nm: float, lambda_min_nm: float, lambda_max_nm: float, n: int = 512) -> "FrequencyGrid":
        """Grid symmetric in frequency about ``center_nm`` that covers both wavelength limits."""
        w0 = float(omega_from_nm(center_nm))
        half = max(float(omega_from_nm(lambda_min_nm)) - w0, w0 - float(omega_from_nm(lambda_max_nm)))
        return cls(w0 - half, w0 + half, int(n))

    @property
    def omega(self) -> np.ndarray:
        return np.linspace(self.omega_min, self.omega_max, self.n)

    @property
    def step(self) -> float:
        return (self.omega_max - self.omega_min) / (self.n - 1)


def wavevector(coeffs: SellmeierCoefficients, omega):
    omega = np.asarray(omega, dtype=float)
    return omega * refractive_index(coeffs, nm_from_omega(omega)) / SPEED_OF_LIGHT


def _raw_mismatch(crystal, coeffs, omega_s, omega_i):
    omega_s = np.asarray(omega_s, dtype=float)
    omega_i = np.asarray(omega_i, dtype=float)
    return (
        wavevector(coeffs, omega_s + omega_i)
        - wavevector(coeffs, omega_s)
        - wavevector(coeffs, omega_i)
        - 2 * np.pi / crystal.poling_period_m
    )


def phase_mismatch(crystal: CrystalSpec, coeffs: SellmeierCoefficients, omega_s, omega_i):
    """``dk = k_p - k_s - k_i - 2 pi / Lambda`` in rad/m, offset so that ``dk(w0, w0) = 0``.

    The constant offset stands in for temperature tuning of the crystal onto
    degeneracy at ``crystal.degeneracy_wavelength_nm``.
    """
    w0 = crystal.omega0
    offset = float(_raw_mismatch(crystal, coeffs, w0, w0))
    return _raw_mismatch(crystal, coeffs, omega_s, omega_i) - offset


@dataclass
class JointSpectralAmplitude:
    """Sampled ``f(w_s, w_i)`` on a square grid, normalised to unit Frobenius norm."""

    omega: np.ndarray
    amplitude: np.ndarray
    crystal: CrystalSpec | None = None
    pump: PumpSpec | None = None
    sellmeier: SellmeierCoefficients | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        amp = np.asarray(self.amplitude)
        if amp.shape != (self.omega.size, self.omega.size):
            raise ValueError("amplitude must be square and match the frequency grid")
        norm = np.linalg.norm(amp)
        if norm == 0:
            raise PhysicsDomainError("joint spectral amplitude vanishes on the grid")
        self.amplitude = amp / norm

    @property
    def step(self) -> float:
        return float(self.omega[1] - self.omega[0])


def _min_lobe_steps(arg: np.ndarray, envelope: np.ndarray, floor: float = 1e-3) -> float:
    """Smallest sinc-lobe width, in grid steps, among adjacent cells inside the pump envelope."""
    live = envelope > floor
    best = np.inf
    pairs = (
        (arg[1:, :], arg[:-1, :], live[1:, :] & live[:-1, :]),
        (arg[:, 1:], arg[:, :-1], live[:, 1:] & live[:, :-1]),
        (arg[1:, :-1], arg[:-1, 1:], live[1:, :-1] & live[:-1, 1:]),
    )
    for a, b, m in pairs:
        d = np.abs(a - b)[m]
        d = d[d > 0]
        if d.size:
            best = min(best, np.pi / d.max())
    return float(best)


def build_jsa(
    crystal: CrystalSpec,
    coeffs: SellmeierCoefficients,
    pump: PumpSpec,
    grid: FrequencyGrid,
    min_lobe_steps: float = 2.0,
) -> JointSpectralAmplitude:
    """Sample the pump envelope times ``sinc(L dk / 2)`` (``sinc(0) = 1``) on ``grid``."""
    if grid.n < 64:
        raise GridResolutionError("grid needs at least 64 points per axis")
    w = grid.omega
    ws, wi = np.meshgrid(w, w, indexing="ij")
    dk = phase_mismatch(crystal, coeffs, ws, wi)
    arg = crystal.length_m * dk / 2
    envelope = np.exp(-((ws + wi - pump.omega_p) ** 2) / (2 * pump.sigma_omega**2))
    lobe = _min_lobe_steps(arg, envelope)
    if lobe < min_lobe_steps:
        raise GridResolutionError(f"sinc lobes span only {lobe:.2f} grid steps (< {min_lobe_steps})")
    phasematch = np.sinc(arg / np.pi)
    return JointSpectralAmplitude(
        w, envelope * phasematch, crystal, pump, coeffs, {"min_lobe_steps": lobe, "grid_n": grid.n}
    )


class MarginalSpectrum(NamedTuple):
    wavelength_nm: np.ndarray
    intensity: np.ndarray
    fwhm_nm: float
    fwhm_defined: bool
    omega: np.ndarray
    intensity_omega: np.ndarray
    center_omega: float


def _half_max_crossings(x: np.ndarray, y: np.ndarray):
    """Linearly interpolated half-maximum crossings around the peak of ``y(x)``; NaNs if absent."""
    i = int(np.argmax(y))
    half = y[i] / 2
    left = np.nonzero(y[: i + 1] < half)[0]
    right = np.nonzero(y[i:] < half)[0]
    if left.size == 0 or right.size == 0:
        return float("nan"), float("nan")
    a = left[-1]
    xl = x[a] + (half - y[a]) * (x[a + 1] - x[a]) / (y[a + 1] - y[a])
    b = i + right[0]
    xr = x[b - 1] + (half - y[b - 1]) * (x[b] - x[b - 1]) / (y[b] - y[b - 1])
    return float(xl), float(xr)


def marginal_spectrum(jsa: JointSpectralAmplitude) -> MarginalSpectrum:
    """Signal marginal ``sum_i |f|**2 dw`` on the wavelength axis, with its FWHM in nm."""
    spec_w = np.sum(np.abs(jsa.amplitude) ** 2, axis=1) * jsa.step
    lam = nm_from_omega(jsa.omega)
    spec_l = spec_w * TWO_PI_C / (lam * 1e-9) ** 2
    order = np.argsort(lam)
    lam, spec_l = lam[order], spec_l[order]
    lo, hi = _half_max_crossings(lam, spec_l)
    defined = np.isfinite(lo)
    wl, wr = _half_max_crossings(jsa.omega, spec_w)
    return MarginalSpectrum(
        lam, spec_l, float(hi - lo) if defined else float("nan"), bool(defined), jsa.omega, spec_w, (wl + wr) / 2
    )


class SchmidtResult(NamedTuple):
    lambdas: np.ndarray
    modes: np.ndarray
    omega: np.ndarray

    @property
    def schmidt_number(self) -> float:
        return float(1 / np.sum(self.lambdas**4))


def schmidt_decompose(jsa: JointSpectralAmplitude, K_keep: int | None = None) -> SchmidtResult:
    """Symmetric (Takagi) Schmidt decomposition of the sampled amplitude.

    The continuous kernel ``F = f / dw`` is expanded as
    ``sum_k lambda_k phi_k(w_s) phi_k(w_i)`` with ``sum_w conj(phi_j) phi_k dw = delta_jk``.
    ``modes[:, k]`` holds ``phi_k`` sampled on the grid.
    """
    f = jsa.amplitude
    try:
        real = np.isrealobj(f) or not np.any(f.imag)
        if real and np.allclose(f, f.T, rtol=0, atol=1e-12):
            # real symmetric: eigh handles degenerate weights exactly
            evals, q = np.linalg.eigh(np.real(f))
            order = np.argsort(-np.abs(evals), kind="stable")
            evals, q = evals[order], q[:, order]
            s = np.abs(evals)
            z = q * np.where(evals < 0, 1j, 1.0)[None, :]
        else:
            u, s, _ = np.linalg.svd(f)
            # for f = f^T left and right singular vectors differ by a phase; split it
            with np.errstate(invalid="ignore", divide="ignore"):
                phase = np.einsum("ik,ik->k", u.conj(), f @ u.conj()) / s
            mag = np.abs(phase)
            phase = np.where(mag > 1e-12, phase / np.where(mag > 0, mag, 1), 1.0)
            z = u * np.sqrt(phase.astype(complex))[None, :]
    except np.linalg.LinAlgError as exc:
        raise SchmidtError(str(exc)) from exc
    modes = z / np.sqrt(jsa.step)
    if K_keep is not None:
        s, modes = s[:K_keep], modes[:, :K_keep]
    return SchmidtResult(s, modes, jsa.omega)


class ThermalFit(NamedTuple):
    mu: float
    residual: float


def fit_thermal_mu(lambdas, decade: float = 10.0) -> ThermalFit:
    """Geometric ratio of the leading weights: ``mu = exp(mean log(lambda_{k+1} / lambda_k))``.

    Uses weights down to ``lambda_0 / decade`` (at least three). Returns an
    infinite residual, with a warning, when those weights are not decreasing.
    """
    lam = np.abs(np.asarray(lambdas, dtype=float))
    lam = lam[lam > 0]
    if lam.size < 3:
        raise PhysicsDomainError("need at least three nonzero mode weights")
    keep = max(3, int(np.count_nonzero(lam >= lam[0] / decade)))
    lead = lam[:keep]
    ratios = np.log(lead[1:] / lead[:-1])
    mu = float(np.exp(ratios.mean()))
    if np.any(ratios > 0):
        warnings.warn("mode weights are not monotonically decreasing", NonMonotoneWeightsWarning, stacklevel=2)
        return ThermalFit(mu, float("inf"))
    k = np.arange(keep)
    predicted = np.log(lead[0]) + k * np.log(mu)
    resid = float(np.sqrt(np.mean((np.log(lead) - predicted) ** 2)))
    return ThermalFit(mu, resid)


def spectrum_to_csv(spec: MarginalSpectrum) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["wavelength_nm", "intensity"])
    for lam, val in zip(spec.wavelength_nm, spec.intensity):
        writer.writerow([repr(float(lam)), repr(float(val))])
    return buf.getvalue()


def lambdas_to_csv(lambdas) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "lambda"])
    for k, val in enumerate(lambdas):
        writer.writerow([k, repr(float(val))])
    return buf.getvalue()


@dataclass(frozen=True)
class SpectrumConfig:
    crystal: CrystalSpec = CrystalSpec()
    pump: PumpSpec = PumpSpec()
    grid_lambda_nm: tuple[float, float] = (1300.0, 1800.0)
    grid_n: int = 512
    sellmeier: SellmeierCoefficients | None = None

    @property
    def grid(self) -> FrequencyGrid:
        lo, hi = self.grid_lambda_nm
        return FrequencyGrid.symmetric(self.crystal.degeneracy_wavelength_nm, lo, hi, self.grid_n)

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "SpectrumConfig":
        sec = obj.get("jsa_spectrum", obj)
        crystal = CrystalSpec(**sec.get("crystal", {}))
        pump = PumpSpec(**sec.get("pump", {}))
        grid = sec.get("grid", {})
        if "sellmeier" in sec:
            coeffs = SellmeierCoefficients.from_dict(sec["sellmeier"])
        elif "sellmeier_file" in sec:
            path = Path(sec["sellmeier_file"])
            if not path.is_absolute() and base_dir is not None and (base_dir / path).exists():
                path = base_dir / path
            elif not path.exists():
                bundled = resources.files("broadsqueeze.data").joinpath(path.name)
                path = Path(str(bundled))
            coeffs = SellmeierCoefficients.load(path)
        else:
            coeffs = default_sellmeier()
        return cls(
            crystal,
            pump,
            (float(grid.get("lambda_min_nm", 1300.0)), float(grid.get("lambda_max_nm", 1800.0))),
            int(grid.get("n", 512)),
            coeffs,
        )

    @classmethod
    def load(cls, path: str | Path) -> "SpectrumConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)

    def coefficients(self) -> SellmeierCoefficients:
        return self.sellmeier if self.sellmeier is not None else default_sellmeier()

    def build(self) -> JointSpectralAmplitude:
        return build_jsa(self.crystal, self.coefficients(), self.pump, self.grid)


def default_config() -> SpectrumConfig:
    text = resources.files("broadsqueeze.data").joinpath("ktp_default.json").read_text()
    return SpectrumConfig.from_dict(json.loads(text))
