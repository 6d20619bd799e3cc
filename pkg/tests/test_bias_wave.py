import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavris.bias_wave import (BiasLineConfig, BiasMode, BiasWaveConfig, ProductBiasConfig,
                              check_mode_frequencies, check_realizable, effective_bias,
                              element_positions, fit_modes, instantaneous_wave, mode_inner_product,
                              product_bias, sine_basis)
from wavris.cell_model import VaractorParams
from wavris.channels import RisGeometry
from wavris.errors import ConfigurationError, ModeFrequencyWarning, RankError, RealizabilityError


def setup(n_x=8, d_x=0.01, l_e=None):
    geom = RisGeometry(n_x, 1, d_x, d_x, 0.05)
    return geom, BiasLineConfig.for_geometry(geom, l_e=l_e)


def random_cfg(rng, n_modes, v_0=6.0, scale=1.0):
    idx = rng.choice(np.arange(1, 3 * n_modes + 2), n_modes, replace=False)
    return BiasWaveConfig(v_0, tuple(BiasMode(int(p), float(rng.uniform(0, scale)),
                                              float(rng.uniform(-np.pi, np.pi)),
                                              float(rng.uniform(-np.pi, np.pi))) for p in idx))


def test_line_validation():
    with pytest.raises(ConfigurationError):
        BiasLineConfig(0.0)
    with pytest.raises(ConfigurationError):
        BiasLineConfig(1.0, l_e=-0.1)
    with pytest.raises(ConfigurationError):
        BiasLineConfig(1.0, phase_velocity=0)
    with pytest.raises(ConfigurationError):
        BiasLineConfig(1.0, boundary="matched")
    line = BiasLineConfig(1.0, 0.25)
    assert line.l_total == 1.5
    assert line.wavenumber(3) == pytest.approx(2 * np.pi)


def test_mode_validation():
    with pytest.raises(ConfigurationError):
        BiasMode(0, 1.0)
    with pytest.raises(ConfigurationError):
        BiasMode(1, -1.0)
    with pytest.raises(ConfigurationError):
        BiasWaveConfig(1.0, (BiasMode(2, 1.0), BiasMode(2, 0.5)))


def test_dc_only_wave():
    line = BiasLineConfig(1.0, 0.1)
    cfg = BiasWaveConfig(4.0, (BiasMode(1, 0.0), BiasMode(3, 0.0)))
    x = np.linspace(0, line.l_total, 11)
    np.testing.assert_array_equal(instantaneous_wave(cfg, line, x[:, None], np.array([0, 1e-9, 3e-7])),
                                  np.full((11, 3), 4.0))


def test_boundary_values_and_mid_line_peak():
    line = BiasLineConfig(1.0, 0.1)
    cfg = BiasWaveConfig(2.0, (BiasMode(1, 1.5),))
    assert instantaneous_wave(cfg, line, 0.0, 0.0) == 2.0
    assert instantaneous_wave(cfg, line, line.l_total, 0.0) == pytest.approx(2.0, abs=1e-12)
    assert instantaneous_wave(cfg, line, line.l_total / 2, 0.0) == pytest.approx(3.5, rel=1e-15)


def test_wave_x_out_of_range():
    line = BiasLineConfig(1.0)
    with pytest.raises(ValueError):
        instantaneous_wave(BiasWaveConfig(0.0), line, -1e-3, 0.0)
    with pytest.raises(ValueError):
        instantaneous_wave(BiasWaveConfig(0.0), line, 1.001, 0.0)


def test_free_boundary_uses_spatial_phase():
    line = BiasLineConfig(1.0, boundary="free")
    cfg = BiasWaveConfig(0.0, (BiasMode(1, 1.0, phi_e=np.pi / 2),))
    assert instantaneous_wave(cfg, line, 0.0, 0.0) == pytest.approx(1.0)
    short = BiasLineConfig(1.0)
    assert instantaneous_wave(cfg, short, 0.0, 0.0) == 0.0


def test_element_positions_examples():
    geom = RisGeometry(1, 1, 0.2, 0.2, 1.0)
    np.testing.assert_allclose(element_positions(geom, BiasLineConfig(0.2, 0.3)), [0.4])
    geom = RisGeometry(4, 1, 1.0, 1.0, 1.0)
    np.testing.assert_allclose(element_positions(geom, BiasLineConfig(4.0, 0.5)), [1.0, 2.0, 3.0, 4.0])


@settings(max_examples=100, deadline=None)
@given(n_x=st.integers(1, 64), d_x=st.floats(1e-3, 1.0), l_e=st.floats(0, 1.0))
def test_element_positions_strictly_inside(n_x, d_x, l_e):
    geom = RisGeometry(n_x, 1, d_x, d_x, 1.0)
    line = BiasLineConfig(geom.l_x, l_e)
    x = element_positions(geom, line)
    assert np.all(x > 0) and np.all(x < line.l_total)


def test_element_positions_length_mismatch():
    geom = RisGeometry(4, 1, 1.0, 1.0, 1.0)
    with pytest.raises(ConfigurationError, match="4.0.*3.0"):
        element_positions(geom, BiasLineConfig(3.0))


def test_effective_bias_empty_modes():
    geom, line = setup()
    np.testing.assert_array_equal(effective_bias(BiasWaveConfig(3.3), line, geom), np.full(8, 3.3))


def test_effective_bias_matches_scalar_formula():
    geom, line = setup(n_x=3, d_x=1.0, l_e=0.0)
    cfg = BiasWaveConfig(5.0, (BiasMode(1, 2.0),))
    k = np.pi / 3.0
    oracle = [5.0 + 2.0 * np.sin(k * (m + 0.5)) for m in range(3)]
    np.testing.assert_allclose(effective_bias(cfg, line, geom), oracle, rtol=1e-15)


def test_effective_bias_sign_flip():
    geom, line = setup()
    pos = BiasWaveConfig(6.0, (BiasMode(2, 1.5, phi_v=0.0),))
    neg = BiasWaveConfig(6.0, (BiasMode(2, 1.5, phi_v=np.pi),))
    np.testing.assert_allclose(effective_bias(neg, line, geom) - 6.0,
                               -(effective_bias(pos, line, geom) - 6.0), atol=1e-15)


def test_effective_bias_realizability_error_lists_elements():
    geom, line = setup()
    cfg = BiasWaveConfig(11.0, (BiasMode(1, 3.0),))
    with pytest.raises(RealizabilityError) as err:
        effective_bias(cfg, line, geom, VaractorParams())
    v = effective_bias(cfg, line, geom)
    assert err.value.elements == np.flatnonzero(v > 12).tolist()


def test_fit_modes_in_span():
    geom, line = setup()
    x = element_positions(geom, line)
    target = 4.0 + 1.7 * np.sin(line.wavenumber(1) * x)
    cfg, res = fit_modes(target, line, geom, 1)
    assert cfg.v_0 == pytest.approx(4.0)
    assert cfg.signed_amplitudes()[0] == pytest.approx(1.7)
    assert res < 1e-12


def test_fit_modes_constant_target():
    geom, line = setup()
    cfg, res = fit_modes(np.full(8, 2.5), line, geom, 3)
    np.testing.assert_allclose(cfg.signed_amplitudes(), 0, atol=1e-12)
    assert cfg.v_0 == pytest.approx(2.5)
    assert res < 1e-12


def test_fit_modes_complete_basis_against_normal_equations():
    geom, line = setup()
    rng = np.random.default_rng(8)
    target = rng.uniform(0, 10, 8)
    cfg, res = fit_modes(target, line, geom, 8)
    assert res < 1e-9 * np.linalg.norm(target)
    # oracle: normal equations with the DC fixed to the mean
    x = (np.arange(8) + 0.5) * 0.01 + 0.01
    S = np.array([[np.sin(p * np.pi * xm / 0.1) for p in range(1, 9)] for xm in x])
    amps = np.linalg.solve(S.T @ S, S.T @ (target - target.mean()))
    np.testing.assert_allclose(cfg.signed_amplitudes(), amps, rtol=1e-7, atol=1e-9)


def test_fit_modes_rank_error():
    # a short aperture in the middle of a long line clusters the samples, and
    # the sampled sines lose numerical rank
    geom = RisGeometry(8, 1, 1e-3, 1e-3, 1.0)
    line = BiasLineConfig(8e-3, 10.0)
    with pytest.raises(RankError):
        fit_modes(np.arange(8.0), line, geom, 8)


def test_fit_modes_too_many_modes():
    geom, line = setup()
    with pytest.raises(ConfigurationError):
        fit_modes(np.zeros(8), line, geom, 9)


def test_serialization_round_trip():
    cfg = BiasWaveConfig(3.0, (BiasMode(1, 1.0, 0.2, np.pi), BiasMode(4, 0.5)))
    d = cfg.to_dict()
    assert set(d) == {"v0", "modes"}
    assert set(d["modes"][0]) == {"p", "amp", "phi_e", "phi_v"}
    assert BiasWaveConfig.from_dict(d) == cfg


def test_check_realizable():
    line = BiasLineConfig(0.1, 0.01)
    var = VaractorParams()
    assert check_realizable(BiasWaveConfig(6.0, (BiasMode(1, 3.0), BiasMode(2, 2.0))), line, var)
    # the envelope bound is violated but the true swing stays within [0.37, 11.63] V
    cfg = BiasWaveConfig(6.0, (BiasMode(1, 3.2), BiasMode(2, 3.2)))
    assert cfg.envelope() == pytest.approx((-0.4, 12.4))
    assert check_realizable(cfg, line, var)
    with pytest.raises(RealizabilityError):
        check_realizable(BiasWaveConfig(10.0, (BiasMode(1, 5.0),)), line, var)


def test_mode_frequency_warning():
    line = BiasLineConfig(0.1, 0.01)
    with pytest.warns(ModeFrequencyWarning):
        check_mode_frequencies(16, line, 3.5e9)
    assert check_mode_frequencies(1, BiasLineConfig(0.1, 0.01, phase_velocity=1e6), 3.5e9)


def test_product_bias_separable():
    geom = RisGeometry(4, 3, 0.01, 0.02, 0.05)
    lx = BiasLineConfig.for_geometry(geom)
    ly = BiasLineConfig(geom.n_y * geom.d_y, geom.d_y)
    amps = np.array([[1.0, 0.0], [0.0, -0.5]])
    v = product_bias(ProductBiasConfig(5.0, amps), lx, ly, geom).reshape(4, 3)
    x = element_positions(geom, lx)
    y = ly.l_e + (np.arange(3) + 0.5) * geom.d_y
    oracle = np.array([[5.0 + np.sin(lx.wavenumber(1) * xi) * np.sin(ly.wavenumber(1) * yj)
                        - 0.5 * np.sin(lx.wavenumber(2) * xi) * np.sin(ly.wavenumber(2) * yj)
                        for yj in y] for xi in x])
    np.testing.assert_allclose(v, oracle, atol=1e-14)


# --- properties -----------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_modes=st.integers(0, 8))
def test_boundary_nulls(seed, n_modes):
    rng = np.random.default_rng(seed)
    line = BiasLineConfig(rng.uniform(0.01, 1.0), rng.uniform(0, 0.1), rng.uniform(1e7, 3e8))
    cfg = random_cfg(rng, n_modes)
    t = rng.uniform(0, 1e-6, 16)
    np.testing.assert_allclose(instantaneous_wave(cfg, line, 0.0, t), cfg.v_0, rtol=0, atol=1e-12)
    np.testing.assert_allclose(instantaneous_wave(cfg, line, line.l_total, t), cfg.v_0, rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_modes=st.integers(0, 8))
def test_temporal_bound(seed, n_modes):
    rng = np.random.default_rng(seed)
    line = BiasLineConfig(0.1, 0.01, boundary="free" if seed % 2 else "short")
    cfg = random_cfg(rng, n_modes)
    x = rng.uniform(0, line.l_total, (64, 1))
    t = rng.uniform(0, 1e-6, (1, 32))
    dev = np.abs(instantaneous_wave(cfg, line, x, t) - cfg.v_0)
    assert dev.max() <= sum(m.amplitude for m in cfg.modes) + 1e-12


def test_mode_orthogonality():
    line = BiasLineConfig(0.3, 0.02)
    for p in range(1, 20):
        for q in range(1, 20):
            expected = line.l_total / 2 if p == q else 0.0
            assert mode_inner_product(p, q, line) == pytest.approx(expected, abs=1e-15)


def test_mode_inner_product_matches_quadrature_on_one_pair():
    from scipy.integrate import quad

    line = BiasLineConfig(0.3, 0.02)
    val, _ = quad(lambda x: np.sin(line.wavenumber(2) * x) * np.sin(line.wavenumber(2) * x), 0, line.l_total)
    assert mode_inner_product(2, 2, line) == pytest.approx(val, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_x=st.integers(2, 16))
def test_fit_round_trip(seed, n_x):
    rng = np.random.default_rng(seed)
    geom, line = setup(n_x)
    n_modes = int(rng.integers(0, n_x + 1))
    cfg = BiasWaveConfig.from_signed(rng.uniform(2, 10), rng.uniform(-1, 1, n_modes))
    target = effective_bias(cfg, line, geom)
    fitted, res = fit_modes(target, line, geom, n_modes)
    assert res <= 1e-9 * np.linalg.norm(target)
    np.testing.assert_allclose(effective_bias(fitted, line, geom), target, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_x=st.integers(2, 16))
def test_fit_nesting(seed, n_x):
    rng = np.random.default_rng(seed)
    geom, line = setup(n_x)
    target = rng.uniform(0, 12, n_x)
    res = [fit_modes(target, line, geom, p)[1] for p in range(n_x + 1)]
    assert np.all(np.diff(res) <= 1e-9 * np.linalg.norm(target))
