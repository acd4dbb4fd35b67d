"""
From TES waveforms to photon numbers
====================================

A transition-edge sensor turns each absorbed burst of photons into a pulse
whose height grows with the energy deposited. Synthetic records are built
for known photon numbers, reduced to one height each, and the height
histogram is split into photon-number bins at equal-likelihood thresholds.
"""

import numpy as np

from broadsqueeze import pulses, simulate
from broadsqueeze import squeezer as sq

spec = sq.SqueezerSpec.thermal(0.961, 0.27, 300)
cfg = simulate.ExperimentConfig(spec, 0.462, 100_000, seed=2, waveform=simulate.WaveformOptions(samples_per_record=256))
truth = simulate.sample_event_counts(cfg)
wset = simulate.synthesize_waveforms(truth, cfg)
print("records:", wset.records.shape, "sample interval", wset.sample_interval_s, "s")

heights = pulses.extract_heights(wset)
peaks = pulses.fit_peaks(heights, expected_max_peaks=10)
for n, p in enumerate(peaks):
    print(f"peak {n}: centre {p.center * 1e3:7.3f} mV  sigma {p.sigma * 1e3:6.3f} mV  weight {p.weight:9.1f}")

result = pulses.assign_counts(heights, peaks, photon_energy_eV=0.8)
print("thresholds (mV):", np.round(result.thresholds.boundaries * 1e3, 3))
print("recovered counts:", result.histogram.counts.tolist())
print("injected counts: ", np.bincount(truth).tolist())
print(f"energy resolution: {result.resolution_eV:.3f} eV FWHM")
print("misassigned events:", int(np.sum(result.thresholds.assign(heights) != truth)))
