import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavris.cell_model import (CellResonatorParams, CouplingKernel, PhaseProfile, UnitCellModel,
                               VaractorParams, apply_coupling, capacitance, ideal_reflection,
                               reflection)
from wavris.channels import RisGeometry
from wavris.errors import BiasRangeError, ConfigurationError


def test_capacitance_zero_bias():
    p = VaractorParams(c_j0=1e-12)
    assert capacitance(0.0, p) == pytest.approx(1e-12)


def test_capacitance_half():
    p = VaractorParams(c_j0=1e-12, v_j=0.7, grading=0.5)
    assert capacitance(2.1, p) == pytest.approx(0.5e-12, rel=1e-12)


def test_capacitance_sweep_matches_formula():
    p = VaractorParams(c_j0=1e-12, v_j=0.7, grading=0.47, v_max=10.0)
    v = np.linspace(0, 10, 100)
    c = capacitance(v, p)
    oracle = [1e-12 / (1 + vi / 0.7) ** 0.47 for vi in v]
    np.testing.assert_allclose(c, oracle, rtol=1e-14)
    assert np.all(np.diff(c) < 0)


def test_capacitance_range_error_carries_value():
    p = VaractorParams()
    with pytest.raises(BiasRangeError) as err:
        capacitance(13.5, p)
    assert err.value.value == 13.5
    with pytest.raises(BiasRangeError):
        capacitance(-0.5, p)


def test_varactor_validation():
    with pytest.raises(ConfigurationError):
        VaractorParams(grading=1.5)
    with pytest.raises(ConfigurationError):
        VaractorParams(v_min=5, v_max=2)


def test_reflection_open_circuit_at_resonance():
    p = CellResonatorParams(loss_resistance=0.0)
    c_res = 1 / (p.omega ** 2 * p.inductance)
    assert reflection(c_res, p) == pytest.approx(1.0, abs=1e-9)


def test_reflection_short_circuit_limit():
    p = CellResonatorParams(loss_resistance=0.0)
    assert reflection(1e3, p) == pytest.approx(-1.0, abs=1e-9)


def _gamma_oracle(c, R, L, f, eta=376.73):
    w = 2 * np.pi * f
    z = (R + 1j * w * L) / (1 - w * w * L * c + 1j * w * R * c)
    return (z - eta) / (z + eta)


def test_reflection_sweep_phase_range():
    p = CellResonatorParams(inductance=2.5e-9, loss_resistance=1.0, rf_frequency=3.5e9)
    v = VaractorParams()
    c = capacitance(np.linspace(v.v_min, v.v_max, 4001), v)
    g = reflection(c, p)
    np.testing.assert_allclose(g, [_gamma_oracle(ci, 1.0, 2.5e-9, 3.5e9) for ci in c], rtol=1e-10)
    span = np.degrees(np.ptp(np.unwrap(np.angle(g))))
    assert span > 300
    assert np.abs(g).min() < 1


def test_ideal_reflection():
    p = VaractorParams(v_min=1.0, v_max=9.0)
    assert np.angle(ideal_reflection(1.0, p)) == pytest.approx(-np.pi) or \
        np.angle(ideal_reflection(1.0, p)) == pytest.approx(np.pi)
    assert np.angle(ideal_reflection(5.0, p)) == pytest.approx(0.0, abs=1e-15)
    v = np.linspace(2, 8, 7)
    ph = np.unwrap(np.angle(ideal_reflection(v, p)))
    np.testing.assert_allclose(np.diff(ph), np.full(6, 2 * np.pi / 8), rtol=1e-12)
    np.testing.assert_allclose(np.abs(ideal_reflection(v, p)), 1.0)
    with pytest.raises(BiasRangeError):
        ideal_reflection(9.5, p)


def test_kernel_validation():
    with pytest.raises(ConfigurationError):
        CouplingKernel([0.2, 0.5, 0.3])
    with pytest.raises(ConfigurationError):
        CouplingKernel([0.5, 0.5])
    with pytest.raises(ConfigurationError):
        CouplingKernel([0.3, 0.3, 0.3])
    np.testing.assert_allclose(CouplingKernel.binomial(1).taps, [0.25, 0.5, 0.25])
    np.testing.assert_allclose(CouplingKernel.binomial(2).taps, np.array([1, 4, 6, 4, 1]) / 16)


def test_coupling_uniform_unchanged():
    geom = RisGeometry(5, 7, 0.1, 0.1, 1.0)
    g = np.full(geom.n, 0.6 * np.exp(0.7j))
    out = apply_coupling(PhaseProfile(g), CouplingKernel.binomial(2), geom)
    np.testing.assert_allclose(out.gamma, g, atol=1e-15)


def test_coupling_impulse_response():
    geom = RisGeometry(1, 9, 0.1, 0.1, 1.0)
    g = np.zeros(9, complex)
    g[4] = 1.0
    out = apply_coupling(PhaseProfile(g), CouplingKernel([0.25, 0.5, 0.25]), geom)
    expected = np.zeros(9)
    expected[3:6] = [0.25, 0.5, 0.25]
    np.testing.assert_allclose(out.gamma, expected, atol=1e-15)


def _naive_coupling(gamma, taps, nx, ny):
    grid = gamma.reshape(nx, ny)
    w = len(taps) // 2
    out = np.zeros_like(grid)
    for i in range(nx):
        for j in range(ny):
            num, den = 0j, 0.0
            for a in range(-w, w + 1):
                for b in range(-w, w + 1):
                    ii, jj = i + a, j + b
                    if 0 <= ii < nx and 0 <= jj < ny:
                        k = taps[a + w] * taps[b + w]
                        num += k * grid[ii, jj]
                        den += k
            out[i, j] = num / den
    return out.ravel()


@pytest.mark.parametrize("taps", [[0.25, 0.5, 0.25], [1 / 16, 4 / 16, 6 / 16, 4 / 16, 1 / 16],
                                  [0.1, 0.2, 0.4, 0.2, 0.1]])
def test_coupling_matches_double_loop(taps):
    geom = RisGeometry(8, 8, 0.1, 0.1, 1.0)
    rng = np.random.default_rng(4)
    g = rng.uniform(0, 1, 64) * np.exp(1j * rng.uniform(-np.pi, np.pi, 64))
    out = apply_coupling(PhaseProfile(g), CouplingKernel(taps), geom)
    np.testing.assert_allclose(out.gamma, _naive_coupling(g, taps, 8, 8), rtol=0, atol=1e-12)


def test_unit_cell_model_validates_resonance():
    with pytest.raises(ConfigurationError):
        UnitCellModel(VaractorParams(), CellResonatorParams(inductance=50e-9))
    UnitCellModel()


def test_unit_cell_model_profile_applies_coupling():
    geom = RisGeometry(4, 1, 0.1, 0.1, 1.0)
    model = UnitCellModel.ideal(coupling=CouplingKernel.binomial(1))
    prof = model.profile(np.array([0.0, 3.0, 6.0, 9.0]), geom)
    raw = ideal_reflection(np.array([0.0, 3.0, 6.0, 9.0]), model.varactor)
    np.testing.assert_allclose(prof.gamma, apply_coupling(raw, model.coupling, geom).gamma)


# --- properties -----------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(v=st.floats(0, 12), R=st.floats(0, 20), L=st.floats(1.5e-9, 4e-9))
def test_passivity(v, R, L):
    p = CellResonatorParams(inductance=L, loss_resistance=R)
    g = reflection(capacitance(v, VaractorParams()), p)
    assert abs(g) <= 1 + 1e-12


def test_monotone_capacitance_finite_difference():
    p = VaractorParams()
    rng = np.random.default_rng(0)
    v = rng.uniform(p.v_min + 1e-3, p.v_max - 1e-3, 1000)
    h = 1e-4
    slope = (capacitance(v + h, p) - capacitance(v - h, p)) / (2 * h)
    assert np.all(slope < 0)


def _random_logconcave_taps(rng):
    w = int(rng.integers(0, 4))
    if rng.random() < 0.5:
        return CouplingKernel.binomial(w)
    sigma = rng.uniform(0.3, 3.0)
    k = np.exp(-0.5 * (np.arange(-w, w + 1) / sigma) ** 2)
    return CouplingKernel(k / k.sum())


def _tv(arr):
    return float(np.sum(np.abs(np.diff(arr))))


def test_coupling_nonexpansive_randomized():
    rng = np.random.default_rng(10)
    for _ in range(1000):
        nx, ny = rng.integers(1, 9, 2)
        geom = RisGeometry(int(nx), int(ny), 0.1, 0.1, 1.0)
        g = rng.uniform(0, 1, geom.n) * np.exp(1j * rng.uniform(-np.pi, np.pi, geom.n))
        out = apply_coupling(PhaseProfile(g), _random_logconcave_taps(rng), geom)
        assert np.abs(out.gamma).max() <= np.abs(g).max() + 1e-12


def test_coupling_reduces_total_variation_on_lines():
    rng = np.random.default_rng(11)
    for trial in range(1000):
        n = int(rng.integers(2, 20))
        geom = RisGeometry(n, 1, 0.1, 0.1, 1.0) if trial % 2 else RisGeometry(1, n, 0.1, 0.1, 1.0)
        g = rng.uniform(0, 1, n) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
        out = apply_coupling(PhaseProfile(g), _random_logconcave_taps(rng), geom)
        assert _tv(out.gamma) <= _tv(g) + 1e-12


def test_reflection_phase_continuity_away_from_resonance():
    p = CellResonatorParams()  # R > 0: no singular resonance
    v = VaractorParams()
    c = capacitance(np.linspace(v.v_min, v.v_max, 20001), v)
    ph = np.angle(reflection(c, p))
    jumps = np.abs(np.angle(np.exp(1j * np.diff(ph))))
    assert jumps.max() < 0.01


def test_axis_total_variation_can_grow_at_2d_edges():
    # edge renormalization gives boundary rows extra weight; a step on the
    # second row leaks into the first with weight 1/3 instead of 1/4
    geom = RisGeometry(4, 4, 0.1, 0.1, 1.0)
    g = np.zeros((4, 4), complex)
    g[1, 2:] = 1.0
    out = apply_coupling(PhaseProfile(g.ravel()), CouplingKernel.binomial(1), geom).gamma.reshape(4, 4)
    tv_y = lambda a: np.abs(np.diff(a, axis=1)).sum()
    tv_all = lambda a: np.abs(np.diff(a, axis=0)).sum() + tv_y(a)
    assert tv_y(out) == pytest.approx(13 / 12)
    assert tv_y(g) == 1.0
    assert tv_all(out) < tv_all(g)


def test_axis_total_variation_random_2d():
    rng = np.random.default_rng(12)
    for _ in range(300):
        nx, ny = (int(v) for v in rng.integers(2, 12, 2))
        geom = RisGeometry(nx, ny, 0.1, 0.1, 1.0)
        g = (rng.uniform(0, 1, geom.n) * np.exp(1j * rng.uniform(-np.pi, np.pi, geom.n))).reshape(nx, ny)
        out = apply_coupling(PhaseProfile(g.ravel()), _random_logconcave_taps(rng), geom).gamma.reshape(nx, ny)
        for axis in (0, 1):
            assert np.abs(np.diff(out, axis=axis)).sum() <= np.abs(np.diff(g, axis=axis)).sum() + 1e-12
