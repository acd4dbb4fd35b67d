"""Acceptance gate: twelve end-to-end criteria at their stated tolerances.

Each test logs one PASS/FAIL line (collected in the terminal summary) and
fails if its criterion is not met. Seeds are fixed by convention: 0 for
single datasets, the setting index for the eight-setting sweep.
"""

import json

import numpy as np
import pytest

from broadsqueeze import cli, fock, jsa, modes, pulses, simulate
from broadsqueeze import squeezer as sq

MU_STAR, ETA_STAR = 0.961, 0.462
SIM_K_MAX = 300
SWEEP_B = np.linspace(0.10, 0.27, 8)


def test_01_mu_inversion(acceptance_log):
    est = modes.invert_slope_to_mu(3.241, 0.173)
    ok = abs(est.mu - 0.9606) <= 0.0005 and round(est.sigma_mu, 3) == 0.028
    acceptance_log(1, "mu inversion", ok, f"mu={est.mu:.5f} sigma_mu={est.sigma_mu:.4f} (target 0.9606+-0.0005, sigma 0.028)")


def test_02_effective_mode_number(acceptance_log):
    K = sq.thermal_shape_functions(0.961).K
    lo = sq.thermal_shape_functions(0.961 - 0.028).K
    hi = sq.thermal_shape_functions(0.961 + 0.028).K
    ok = round(K) == 25 and abs(lo - 14.4) <= 1 and abs(hi - 90.3) <= 1
    acceptance_log(2, "effective mode number", ok, f"K={K:.2f} bounds=({lo:.2f}, {hi:.2f}) (target 25, (14.4, 90.3)+-1)")


def test_03_single_mode_identities(acceptance_log):
    worst_g2 = 0.0
    for r in (0.1, 0.3, 0.5):
        g2 = fock.g_factorial(sq.single_mode_distribution(r, 60), 2).value
        worst_g2 = max(worst_g2, abs(g2 - (3 + 1 / np.sinh(r) ** 2)))
    worst_line = 0.0
    for mean_n in np.logspace(-2, 2, 41):
        ref = sq.single_mode_reference(mean_n)
        worst_line = max(worst_line, abs(ref.g3 - (9 * ref.g2 - 12)))
    ok = worst_g2 <= 1e-6 and worst_line <= 1e-12
    acceptance_log(3, "single-mode identities", ok, f"max|g2 err|={worst_g2:.2e} (<=1e-6) max|g3-(9g2-12)|={worst_line:.2e} (<=1e-12)")


def test_04_exact_vs_approximate(acceptance_log):
    worst_rel = 0.0
    worst_line = 0.0
    for B in np.linspace(0.05, 0.3, 26):
        exact = sq.g_multi_exact(sq.SqueezerSpec.thermal(MU_STAR, B, K_max=2000))
        approx = sq.g_multi_approx(MU_STAR, B)
        worst_rel = max(worst_rel, abs(approx.g2 / exact.g2 - 1), abs(approx.g3 / exact.g3 - 1))
        worst_line = max(worst_line, abs(approx.g3 - (sq.slope(MU_STAR) * approx.g2 + sq.intercept(MU_STAR))))
    ok = worst_rel <= 0.01 and worst_line <= 1e-10
    acceptance_log(4, "exact vs approximate", ok, f"max rel diff={worst_rel:.3e} (<=1e-2) intercept identity={worst_line:.2e} (<=1e-10)")


def test_05_loss_round_trip(acceptance_log):
    rng = np.random.default_rng(0)
    cases = [np.eye(11)[k] for k in range(11)] + list(rng.dirichlet(np.ones(11), 200))
    cases += [rng.dirichlet(np.full(11, 0.1)) for _ in range(100)]
    worst = 0.0
    for p in cases:
        d = fock.PhotonDistribution(p)
        back = fock.compensate_loss(fock.apply_loss(d, ETA_STAR), ETA_STAR, M=20)
        worst = max(worst, np.abs(back.probs - np.r_[p, np.zeros(10)]).max())
    acceptance_log(5, "loss round trip", worst <= 1e-9, f"max abs err={worst:.2e} over {len(cases)} distributions (<=1e-9)")


@pytest.fixture(scope="module")
def klyshko_dataset():
    cfg = simulate.ExperimentConfig(sq.SqueezerSpec.thermal(MU_STAR, 0.131, SIM_K_MAX), ETA_STAR, 10**6, seed=0)
    return simulate.sample_counts(cfg)


def test_06_klyshko_pattern(acceptance_log, klyshko_dataset):
    d = fock.from_counts(klyshko_dataset)
    k1, k2, k3 = fock.klyshko_figures(d, 3)
    pattern = k1.value > 1 and k2.value < 1 and k3.value > 1
    rng = np.random.default_rng(0)
    control = fock.from_counts(fock.CountHistogram.from_events(rng.poisson(1.0, 10**6)))
    pulls = [abs(k.value - 1) / k.sigma for k in fock.klyshko_figures(control, 4)]
    ok = pattern and max(pulls) <= 3
    acceptance_log(
        6,
        "Klyshko pattern",
        ok,
        f"counts={klyshko_dataset.counts.tolist()} K1={k1.value:.3g} K2={k2.value:.3g} K3={k3.value:.3g}; "
        f"Poisson control max pull={max(pulls):.2f} (<=3)",
    )


@pytest.fixture(scope="module")
def sweep_reports(tmp_path_factory):
    """Eight CLI-simulated settings pushed through ``analyze``; returns report paths and histograms."""
    work = tmp_path_factory.mktemp("sweep")
    paths, hists = [], []
    for i, B in enumerate(SWEEP_B):
        counts = work / f"counts_{i}.csv"
        rep = work / f"report_{i}.json"
        rc = cli.main(
            ["simulate", "--mu", str(MU_STAR), "--B", repr(float(B)), "--K-max", str(SIM_K_MAX), "--eta", str(ETA_STAR),
             "--events", str(10**6), "--seed", str(i), "--out", str(counts)]
        )
        assert rc == 0
        assert cli.main(["analyze", str(counts), "--eta", str(ETA_STAR), "--label", f"B={B:.4f}", "--out", str(rep)]) == 0
        paths.append(rep)
        hists.append(fock.CountHistogram.from_csv(counts.read_text()))
    return work, paths, hists


def test_07_fano_witness(acceptance_log, klyshko_dataset, sweep_reports):
    _, _, hists = sweep_reports
    min_pull = np.inf
    worst_identity = 0.0
    for h in [klyshko_dataset, *hists]:
        d = fock.from_counts(h)
        f = fock.fano(d)
        min_pull = min(min_pull, (f.value - 1) / f.sigma)
        ident = 1 + fock.mean_photon(d).value * (fock.g_factorial(d, 2).value - 1)
        worst_identity = max(worst_identity, abs(f.value - ident) / f.value)
    ok = min_pull >= 10 and worst_identity <= 1e-12
    acceptance_log(7, "Fano witness", ok, f"min (F-1)/sigma={min_pull:.1f} (>=10) identity rel err={worst_identity:.1e} (<=1e-12)")


def test_08_end_to_end_inference(acceptance_log, sweep_reports):
    work, paths, _ = sweep_reports
    out = work / "modes.json"
    rc = cli.main(["fit-modes", "--reports", *map(str, paths), "--out", str(out)])
    S_ref = sq.slope(MU_STAR)
    if rc != 0:
        pts = [modes.CorrelationPoint(**{k: v for k, v in p.items()}) for p in _points(paths)]
        fit = modes.fit_slope(pts)
        acceptance_log(8, "end-to-end inference", False, f"fit-modes exit {rc}; slope S={fit.S:.3f}+-{fit.sigma_S:.3f} (S(0.961)={S_ref:.4f})")
        return
    block = json.loads(out.read_text())["modes"]
    B_err = max(abs(b / B - 1) for b, B in zip(block["B_per_point"], SWEEP_B))
    ok = abs(block["mu"] - MU_STAR) <= 0.05 and B_err <= 0.10 and abs(block["S"] - S_ref) <= 2 * block["sigma_S"]
    acceptance_log(
        8,
        "end-to-end inference",
        ok,
        f"mu={block['mu']:.4f} (+-0.05 of 0.961) max B rel err={B_err:.3f} (<=0.10) "
        f"S={block['S']:.3f}+-{block['sigma_S']:.3f} vs {S_ref:.4f} (<=2 sigma)",
    )


def _points(paths):
    pts = []
    for p in paths:
        stats = json.loads(open(p).read())["photon_statistics"]
        pts.append(dict(g2=stats["g2"]["value"], sigma_g2=stats["g2"]["sigma"], g3=stats["g3"]["value"], sigma_g3=stats["g3"]["sigma"]))
    return pts


def test_09_spectrum(acceptance_log):
    amp = jsa.default_config().build()
    spec = jsa.marginal_spectrum(amp)
    offset = abs(spec.center_omega - amp.crystal.omega0) / amp.step
    ok = spec.fwhm_defined and abs(spec.fwhm_nm - 150) <= 30 and offset <= 2
    acceptance_log(9, "marginal spectrum", ok, f"FWHM={spec.fwhm_nm:.1f} nm (150+-30) centre offset={offset:.2f} steps (<=2)")


def test_10_schmidt_properties(acceptance_log):
    shipped = jsa.schmidt_decompose(jsa.default_config().build())
    norm_err = abs(np.sum(shipped.lambdas**2) - 1)
    x = np.linspace(-5, 5, 200)
    sep = jsa.schmidt_decompose(jsa.JointSpectralAmplitude(x, np.outer(np.exp(-(x**2)), np.exp(-(x**2)))))
    sig_plus, sig_minus = 3.0, 0.5
    # closed-form ratio of exp(-(x+y)^2/(4 s+^2) - (x-y)^2/(4 s-^2))
    mu_ref = (sig_plus - sig_minus) / (sig_plus + sig_minus)
    g = np.linspace(-15, 15, 600)
    X, Y = np.meshgrid(g, g, indexing="ij")
    corr = np.exp(-((X + Y) ** 2) / (4 * sig_plus**2) - (X - Y) ** 2 / (4 * sig_minus**2))
    mu_fit = jsa.fit_thermal_mu(jsa.schmidt_decompose(jsa.JointSpectralAmplitude(g, corr)).lambdas).mu
    ok = norm_err <= 1e-10 and abs(sep.schmidt_number - 1) <= 1e-10 and abs(mu_fit - mu_ref) <= 1e-3
    acceptance_log(
        10,
        "Schmidt properties",
        ok,
        f"|sum lambda^2 - 1|={norm_err:.1e} separable K={sep.schmidt_number:.12f} mu={mu_fit:.5f} vs {mu_ref:.5f} (<=1e-3)",
    )


def test_11_pulse_round_trip(acceptance_log):
    injected = np.array([50_000, 30_000, 20_000])
    per_event = np.random.default_rng(0).permutation(np.repeat(np.arange(3), injected))
    cfg = simulate.ExperimentConfig(
        sq.SqueezerSpec.explicit([0.0]), ETA_STAR, per_event.size, seed=0, waveform=simulate.WaveformOptions(samples_per_record=256)
    )
    heights = pulses.extract_heights(simulate.synthesize_waveforms(per_event, cfg))
    res = pulses.assign_counts(heights, pulses.fit_peaks(heights, 12))
    got = np.zeros(3, dtype=int)
    got[: min(3, res.histogram.counts.size)] = res.histogram.counts[:3]
    pulls = np.abs(got - injected) / np.sqrt(injected)
    extra = int(res.histogram.counts[3:].sum())
    ok = pulls.max() <= 3 and extra == 0 and abs(res.resolution_eV - 0.2) <= 0.02
    acceptance_log(
        11,
        "pulse round trip",
        ok,
        f"recovered={got.tolist()} injected={injected.tolist()} max pull={pulls.max():.2f} (<=3) "
        f"resolution={res.resolution_eV:.4f} eV (0.2+-0.02)",
    )


def test_12_efficiency_estimator(acceptance_log):
    cfg = simulate.ExperimentConfig(sq.SqueezerSpec.thermal(MU_STAR, 0.05, SIM_K_MAX), ETA_STAR, 10**7, seed=0)
    est = fock.estimate_efficiency(fock.from_counts(simulate.sample_counts(cfg, threads=4)))
    ok = abs(est.value - ETA_STAR) <= 0.01
    acceptance_log(12, "efficiency estimator", ok, f"eta={est.value:.4f}+-{est.sigma:.4f} vs 0.462 (+-0.01)")
