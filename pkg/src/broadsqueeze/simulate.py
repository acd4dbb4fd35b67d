"""Seeded Monte Carlo of photon-number-resolved detection events.

Each event draws an independent pair number for every squeezed mode, sums
the photons and thins them binomially with the detection efficiency. The
event index space is cut into chunks of :data:`CHUNK_SIZE`; chunk ``j`` uses
its own counter-derived stream ``SeedSequence(seed, spawn_key=(stream, j))``,
so results do not depend on how many threads generate them.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PhysicsDomainError
from .fock import CountHistogram
from .squeezer import SqueezerSpec, pair_distribution

CHUNK_SIZE = 1 << 16
WAVEFORM_CHUNK = 1 << 12
_COUNT_STREAM = 0
_WAVEFORM_STREAM = 1

TESW_MAGIC = b"TESW"
TESW_VERSION = 1
_TESW_HEADER = struct.Struct("<4sHIId")

FWHM_PER_SIGMA = 2 * np.sqrt(2 * np.log(2))


@dataclass(frozen=True)
class WaveformOptions:
    """Synthetic TES record model; amplitudes are in volts with ``volts_per_eV`` gain."""

    samples_per_record: int = 1000
    sample_interval_s: float = 4e-9
    photon_energy_eV: float = 0.8
    resolution_fwhm_eV: float = 0.2
    volts_per_eV: float = 0.05
    pulse_start_s: float = 0.4e-6
    rise_time_s: float = 20e-9
    decay_time_s: float = 200e-9
    baseline_noise_rms_eV: float = 0.01

    def __post_init__(self):
        if self.resolution_fwhm_eV < 0 or self.baseline_noise_rms_eV < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.samples_per_record < 1 or self.sample_interval_s <= 0:
            raise ValueError("invalid sampling parameters")
        if not 0 < self.rise_time_s < self.decay_time_s:
            raise ValueError("need 0 < rise_time_s < decay_time_s")

    def pulse_shape(self) -> np.ndarray:
        """Double-exponential template sampled on the record, peak sample scaled to 1."""
        t = np.arange(self.samples_per_record) * self.sample_interval_s - self.pulse_start_s
        shape = np.where(t >= 0, np.exp(-np.clip(t, 0, None) / self.decay_time_s) - np.exp(-np.clip(t, 0, None) / self.rise_time_s), 0.0)
        peak = shape.max()
        if peak <= 0:
            raise ValueError("pulse does not start inside the record")
        return shape / peak


@dataclass(frozen=True)
class ExperimentConfig:
    spec: SqueezerSpec
    eta: float
    n_events: int
    seed: int = 0
    waveform: WaveformOptions = field(default_factory=WaveformOptions)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise PhysicsDomainError(f"efficiency {self.eta!r} outside [0, 1]")
        if self.n_events <= 0:
            raise ValueError("n_events must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class WaveformSet:
    sample_interval_s: float
    records: np.ndarray

    @property
    def n_records(self) -> int:
        return self.records.shape[0]

    @property
    def samples_per_record(self) -> int:
        return self.records.shape[1]


def _chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, chunk))))


def _conditional_pair_tables(r_values: np.ndarray) -> list[tuple[float, np.ndarray]]:
    """Per mode: probability of at least one pair, and the CDF of the pair number given >= 1."""
    tables = []
    for r in r_values:
        if r == 0:
            tables.append((0.0, np.array([1.0])))
            continue
        t2 = np.tanh(r) ** 2
        # extend until the geometric-like tail is below double precision
        max_pairs = 8
        while t2**max_pairs > 1e-18 and max_pairs < 4096:
            max_pairs *= 2
        p = pair_distribution(r, max_pairs)
        p_nz = float(1.0 - p[0])
        cdf = np.cumsum(p[1:]) / p[1:].sum()
        cdf[-1] = 1.0
        tables.append((p_nz, cdf))
    return tables


def _sample_chunk(tables, eta: float, seed: int, chunk: int, size: int) -> np.ndarray:
    rng = _chunk_rng(seed, _COUNT_STREAM, chunk)
    photons = np.zeros(size, dtype=np.int64)
    for p_nz, cdf in tables:
        if p_nz == 0.0:
            continue
        # Bernoulli(p_nz) positions as a uniform subset of binomially drawn size
        hits = rng.binomial(size, p_nz)
        if hits == 0:
            continue
        where = rng.choice(size, hits, replace=False)
        pairs = np.searchsorted(cdf, rng.random(hits), side="right") + 1
        photons[where] += 2 * pairs
    if eta < 1.0:
        nz = np.nonzero(photons)[0]
        photons[nz] = rng.binomial(photons[nz], eta)
    return photons


def _chunks(n_events: int, chunk_size: int):
    n_chunks = -(-n_events // chunk_size)
    return [(j, min(chunk_size, n_events - j * chunk_size)) for j in range(n_chunks)]


def sample_event_counts(config: ExperimentConfig, threads: int = 1) -> np.ndarray:
    """Detected photon number for every event, in event order."""
    tables = _conditional_pair_tables(config.spec.r_values())
    jobs = _chunks(config.n_events, CHUNK_SIZE)

    def run(job):
        j, size = job
        return _sample_chunk(tables, config.eta, config.seed, j, size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    return np.concatenate(parts)


def sample_counts(config: ExperimentConfig, threads: int = 1) -> CountHistogram:
    return CountHistogram.from_events(sample_event_counts(config, threads))


def synthesize_waveforms(counts_per_event, config: ExperimentConfig, threads: int = 1) -> WaveformSet:
    """TES-like records: baseline noise plus a pulse of height ``n * E_ph`` jittered by the resolution.

    Records with ``n = 0`` contain baseline noise only. Amplitude jitter is
    Gaussian with FWHM ``resolution_fwhm_eV``.
    """
    opts = config.waveform
    counts = np.asarray(counts_per_event, dtype=np.int64)
    shape = opts.pulse_shape().astype(np.float64)
    sigma_amp = opts.resolution_fwhm_eV / FWHM_PER_SIGMA
    records = np.empty((counts.size, opts.samples_per_record), dtype=np.float32)

    def run(job):
        j, size = job
        lo = j * WAVEFORM_CHUNK
        rng = _chunk_rng(config.seed, _WAVEFORM_STREAM, j)
        n = counts[lo : lo + size]
        noise = rng.standard_normal((size, opts.samples_per_record)) * opts.baseline_noise_rms_eV
        jitter = rng.standard_normal(size) * sigma_amp
        amp_eV = np.where(n > 0, n * opts.photon_energy_eV + jitter, 0.0)
        block = (amp_eV[:, None] * shape[None, :] + noise) * opts.volts_per_eV
        records[lo : lo + size] = block

    jobs = _chunks(counts.size, WAVEFORM_CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, jobs))
    else:
        for job in jobs:
            run(job)
    return WaveformSet(opts.sample_interval_s, records)


def tesw_bytes(wset: WaveformSet) -> bytes:
    header = _TESW_HEADER.pack(TESW_MAGIC, TESW_VERSION, wset.n_records, wset.samples_per_record, wset.sample_interval_s)
    return header + np.ascontiguousarray(wset.records, dtype="<f4").tobytes()


def write_tesw(wset: WaveformSet, path: str | Path) -> None:
    Path(path).write_bytes(tesw_bytes(wset))


def parse_tesw(data: bytes) -> WaveformSet:
    if len(data) < _TESW_HEADER.size:
        raise ValueError("truncated TESW header")
    magic, version, n_rec, n_samp, dt = _TESW_HEADER.unpack_from(data)
    if magic != TESW_MAGIC:
        raise ValueError("not a TESW file")
    if version != TESW_VERSION:
        raise ValueError(f"unsupported TESW version {version}")
    expected = _TESW_HEADER.size + 4 * n_rec * n_samp
    if len(data) != expected:
        raise ValueError(f"TESW payload size mismatch: {len(data)} bytes, expected {expected}")
    rec = np.frombuffer(data, dtype="<f4", offset=_TESW_HEADER.size).reshape(n_rec, n_samp)
    return WaveformSet(dt, rec.astype(np.float32))


def read_tesw(path: str | Path) -> WaveformSet:
    return parse_tesw(Path(path).read_bytes())
