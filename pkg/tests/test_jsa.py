import warnings

import numpy as np
import pytest

from broadsqueeze import jsa
from broadsqueeze.errors import GridResolutionError, NonMonotoneWeightsWarning, PhysicsDomainError


def mehler_ratio(a, b):
    """Geometric Schmidt ratio of exp(-a (x+y)^2 - b (x-y)^2).

    Matching -(a+b)(x^2+y^2) + 2(b-a)xy to Mehler's kernel gives
    2t/(1+t^2) = (b-a)/(a+b), whose root inside (-1, 1) is below.
    """
    return (np.sqrt(b) - np.sqrt(a)) / (np.sqrt(b) + np.sqrt(a))


def gaussian_kernel(sig_plus, sig_minus, n=600, half_width=15.0):
    x = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    amp = np.exp(-((X + Y) ** 2) / (4 * sig_plus**2)) * np.exp(-((X - Y) ** 2) / (4 * sig_minus**2))
    return jsa.JointSpectralAmplitude(x, amp)


@pytest.mark.parametrize("sig_plus,sig_minus", [(3.0, 0.5), (2.0, 1.0), (0.6, 2.5)])
def test_correlated_gaussian_schmidt_spectrum(sig_plus, sig_minus):
    t = abs(mehler_ratio(1 / (4 * sig_plus**2), 1 / (4 * sig_minus**2)))
    res = jsa.schmidt_decompose(gaussian_kernel(sig_plus, sig_minus))
    expected = np.sqrt(1 - t**2) * t ** np.arange(8)
    np.testing.assert_allclose(res.lambdas[:8], expected, atol=1e-6)
    assert jsa.fit_thermal_mu(res.lambdas).mu == pytest.approx(t, abs=1e-3)
    assert res.schmidt_number == pytest.approx((1 + t**2) / (1 - t**2), rel=1e-5)


def test_weights_normalised_and_modes_orthonormal():
    res = jsa.schmidt_decompose(gaussian_kernel(3.0, 0.5))
    assert np.sum(res.lambdas**2) == pytest.approx(1.0, abs=1e-10)
    dw = res.omega[1] - res.omega[0]
    gram = res.modes[:, :10].conj().T @ res.modes[:, :10] * dw
    np.testing.assert_allclose(gram, np.eye(10), atol=1e-9)


@pytest.mark.parametrize("complex_phase", [False, True])
def test_reconstruction(complex_phase):
    amp = gaussian_kernel(2.0, 0.7, n=300)
    if complex_phase:
        w = amp.omega
        chirp = np.exp(0.3j * (w[:, None] + w[None, :]) ** 2)
        amp = jsa.JointSpectralAmplitude(w, amp.amplitude * chirp)
    res = jsa.schmidt_decompose(amp)
    dw = res.omega[1] - res.omega[0]
    back = (res.modes * res.lambdas) @ res.modes.T * dw
    np.testing.assert_allclose(back, amp.amplitude, atol=1e-8)


@pytest.mark.parametrize("symmetric", [True, False])
def test_separable_kernel_single_mode(symmetric):
    x = np.linspace(-5, 5, 200)
    g = np.exp(-(x**2))
    h = g if symmetric else np.exp(-((x - 0.5) ** 2) / 3)
    res = jsa.schmidt_decompose(jsa.JointSpectralAmplitude(x, np.outer(g, h)))
    assert res.schmidt_number == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("scale", [3.7, -0.01, 2j])
def test_amplitude_rescaling_invariance(scale):
    base = gaussian_kernel(2.0, 0.7, n=200)
    scaled = jsa.JointSpectralAmplitude(base.omega, base.amplitude * scale)
    a = jsa.schmidt_decompose(base).lambdas[:10]
    b = jsa.schmidt_decompose(scaled).lambdas[:10]
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_k_keep_truncates():
    res = jsa.schmidt_decompose(gaussian_kernel(2.0, 0.7, n=200), K_keep=5)
    assert res.lambdas.shape == (5,) and res.modes.shape == (200, 5)


def test_fit_thermal_mu_guards():
    with pytest.raises(PhysicsDomainError):
        jsa.fit_thermal_mu([1.0, 0.5])
    with pytest.warns(NonMonotoneWeightsWarning):
        fit = jsa.fit_thermal_mu([0.5, 0.6, 0.4, 0.3])
    assert fit.residual == float("inf")


def test_zero_amplitude_rejected():
    with pytest.raises(PhysicsDomainError):
        jsa.JointSpectralAmplitude(np.arange(4.0), np.zeros((4, 4)))


def test_constant_index_sellmeier():
    c = jsa.SellmeierCoefficients(A=2.25)
    np.testing.assert_allclose(jsa.refractive_index(c, [500.0, 1500.0]), 1.5)


def test_single_pole_sellmeier():
    c = jsa.SellmeierCoefficients(A=1.0, poles=((1.0, 0.01),))
    lam = 1.0
    assert jsa.refractive_index(c, 1000.0) == pytest.approx(np.sqrt(1 + lam**2 / (lam**2 - 0.01)))


def test_shipped_ktp_coefficients():
    coeffs = jsa.default_sellmeier()

    def n_z(lam_um):
        l2 = lam_um**2
        return np.sqrt(2.12725 + 1.18431 * l2 / (l2 - 0.0514852) + 0.6603 * l2 / (l2 - 100.00507) - 0.00968956 * l2)

    lam_nm = np.array([767.5, 1300.0, 1535.0, 1800.0])
    np.testing.assert_allclose(jsa.refractive_index(coeffs, lam_nm), n_z(lam_nm / 1000), rtol=1e-12)
    with pytest.raises(PhysicsDomainError):
        jsa.refractive_index(coeffs, 5000.0)


def test_sellmeier_dict_round_trip():
    coeffs = jsa.default_sellmeier()
    assert jsa.SellmeierCoefficients.from_dict(coeffs.to_dict()) == coeffs


def test_first_order_poling_period_near_shipped_value():
    coeffs = jsa.default_sellmeier()
    crystal = jsa.CrystalSpec()
    w0 = crystal.omega0
    dk_material = jsa.wavevector(coeffs, 2 * w0) - 2 * jsa.wavevector(coeffs, w0)
    assert 2 * np.pi / dk_material == pytest.approx(crystal.poling_period_m, rel=0.01)


def test_phase_mismatch_symmetry_and_zero():
    crystal, coeffs = jsa.CrystalSpec(), jsa.default_sellmeier()
    w0 = crystal.omega0
    assert jsa.phase_mismatch(crystal, coeffs, w0, w0) == pytest.approx(0.0, abs=1e-6)
    rng = np.random.default_rng(1)
    ws, wi = w0 * (1 + 0.1 * rng.uniform(-1, 1, (2, 50)))
    np.testing.assert_allclose(
        jsa.phase_mismatch(crystal, coeffs, ws, wi), jsa.phase_mismatch(crystal, coeffs, wi, ws), rtol=1e-12
    )
    d = 0.02 * w0
    up = jsa.phase_mismatch(crystal, coeffs, w0 + d, w0 + d)
    down = jsa.phase_mismatch(crystal, coeffs, w0 - d, w0 - d)
    assert np.sign(up) == -np.sign(down)


def test_unit_conversions_invert():
    lam = np.array([767.5, 1535.0])
    np.testing.assert_allclose(jsa.nm_from_omega(jsa.omega_from_nm(lam)), lam)


def test_gaussian_marginal_fwhm():
    w0 = jsa.omega_from_nm(1535.0)
    s = 1e12
    w = w0 + np.linspace(-20 * s, 20 * s, 801)
    g = np.exp(-((w - w0) ** 2) / (4 * s**2))
    spec = jsa.marginal_spectrum(jsa.JointSpectralAmplitude(w, np.outer(g, g)))
    dw = 2 * np.sqrt(2 * np.log(2)) * s
    expected = jsa.nm_from_omega(w0 - dw / 2) - jsa.nm_from_omega(w0 + dw / 2)
    assert spec.fwhm_nm == pytest.approx(expected, rel=2e-3)
    assert spec.center_omega == pytest.approx(w0, abs=w[1] - w[0])


def test_shipped_spectrum_converges_with_grid():
    cfg = jsa.default_config()
    widths = []
    for n in (384, 768):
        c = jsa.SpectrumConfig(cfg.crystal, cfg.pump, cfg.grid_lambda_nm, n, cfg.sellmeier)
        widths.append(jsa.marginal_spectrum(c.build()).fwhm_nm)
    assert widths[0] == pytest.approx(widths[1], rel=5e-3)


def test_grid_guards():
    cfg = jsa.default_config()
    grid = jsa.FrequencyGrid.symmetric(1535.0, 1300.0, 1800.0, 32)
    with pytest.raises(GridResolutionError):
        jsa.build_jsa(cfg.crystal, cfg.coefficients(), cfg.pump, grid)
    long_crystal = jsa.CrystalSpec(length_m=2.0)
    grid = jsa.FrequencyGrid.symmetric(1535.0, 1300.0, 1800.0, 128)
    with pytest.raises(GridResolutionError):
        jsa.build_jsa(long_crystal, cfg.coefficients(), cfg.pump, grid)


def test_symmetric_grid_is_centred():
    grid = jsa.FrequencyGrid.symmetric(1535.0, 1300.0, 1800.0, 512)
    w = grid.omega
    assert (w[0] + w[-1]) / 2 == pytest.approx(jsa.omega_from_nm(1535.0), rel=1e-14)
    assert jsa.nm_from_omega(w[0]) >= 1800.0 - 1e-6 or jsa.nm_from_omega(w[-1]) <= 1300.0 + 1e-6


def test_csv_writers():
    amp = jsa.default_config().build()
    spec = jsa.marginal_spectrum(amp)
    assert jsa.spectrum_to_csv(spec).splitlines()[0].startswith("wavelength_nm")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam = jsa.schmidt_decompose(amp, K_keep=5).lambdas
    assert len(jsa.lambdas_to_csv(lam).splitlines()) == 6
