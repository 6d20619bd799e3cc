"""Unit-cell physics: bias voltage -> capacitance -> reflection coefficient.

The varactor follows the graded-junction law ``C = c_j0 * (1 + V/v_j)**-m``.
The unit cell is a parallel L-C tank (series loss R in the inductive branch)
seen as a surface impedance against free space.  Near-field coupling between
cells is modelled as a separable, normalized smoothing of the complex
reflection field.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import BiasRangeError, ConfigurationError, DimensionError

FREE_SPACE_IMPEDANCE = 376.73

# Slack on bias range checks so that exact least-squares fits landing on an
# endpoint are not rejected for round-off.
BIAS_TOL = 1e-9


@dataclass(frozen=True)
class VaractorParams:
    c_j0: float = 2e-12
    v_j: float = 0.7
    grading: float = 0.5
    v_min: float = 0.0
    v_max: float = 12.0

    def __post_init__(self):
        if not self.c_j0 > 0:
            raise ConfigurationError(f"c_j0 must be > 0, got {self.c_j0!r}")
        if not self.v_j > 0:
            raise ConfigurationError(f"v_j must be > 0, got {self.v_j!r}")
        if not 0 < self.grading <= 1:
            raise ConfigurationError(f"grading must lie in (0, 1], got {self.grading!r}")
        if not 0 <= self.v_min < self.v_max:
            raise ConfigurationError(f"need 0 <= v_min < v_max, got [{self.v_min}, {self.v_max}]")

    @property
    def capacitance_range(self):
        """``(C(v_max), C(v_min))``, i.e. ``(c_min, c_max)``."""
        return capacitance(self.v_max, self), capacitance(self.v_min, self)

    def check_range(self, v_bias):
        v = np.asarray(v_bias, dtype=float)
        bad = (v < self.v_min - BIAS_TOL) | (v > self.v_max + BIAS_TOL) | ~np.isfinite(v)
        if np.any(bad):
            offending = v[bad] if v.ndim else v
            value = float(offending) if np.ndim(offending) == 0 else offending.tolist()
            raise BiasRangeError(value, self.v_min, self.v_max)
        return np.clip(v, self.v_min, self.v_max)


@dataclass(frozen=True)
class CellResonatorParams:
    inductance: float = 2.5e-9
    loss_resistance: float = 0.5
    free_space_impedance: float = FREE_SPACE_IMPEDANCE
    rf_frequency: float = 3.5e9

    def __post_init__(self):
        if not self.inductance > 0:
            raise ConfigurationError(f"inductance must be > 0, got {self.inductance!r}")
        if not self.loss_resistance >= 0:
            raise ConfigurationError(f"loss_resistance must be >= 0, got {self.loss_resistance!r}")
        if not self.free_space_impedance > 0:
            raise ConfigurationError("free_space_impedance must be > 0")
        if not self.rf_frequency > 0:
            raise ConfigurationError(f"rf_frequency must be > 0, got {self.rf_frequency!r}")

    @property
    def omega(self):
        return 2 * np.pi * self.rf_frequency

    @property
    def resonance_capacitance(self):
        return 1.0 / (self.omega ** 2 * self.inductance)


@dataclass(frozen=True, eq=False)
class CouplingKernel:
    """Symmetric, nonnegative smoothing taps of length ``2*w + 1`` (applied per axis)."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=float, ndmin=1)
        if taps.ndim != 1 or taps.size % 2 != 1:
            raise ConfigurationError("coupling taps must be a 1-D array of odd length")
        if np.any(taps < 0):
            raise ConfigurationError("coupling taps must be nonnegative")
        if not np.allclose(taps, taps[::-1], rtol=0, atol=1e-12):
            raise ConfigurationError("coupling taps must be symmetric about the center")
        total = taps.sum()
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"coupling taps must sum to 1, got {total!r}")
        taps = taps / total
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def half_width(self):
        return self.taps.size // 2

    @classmethod
    def binomial(cls, half_width=1):
        k = 2 * half_width
        return cls(comb(k, np.arange(k + 1)) / 2.0 ** k)

    @classmethod
    def identity(cls):
        return cls([1.0])


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    """Per-element complex reflection coefficients, row-major over the RIS grid."""

    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=np.complex128, ndmin=1)
        if gamma.ndim != 1:
            raise DimensionError("gamma", "must be a flat vector")
        if np.any(np.abs(gamma) > 1 + 1e-12):
            raise ConfigurationError("passive surface requires |gamma| <= 1")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_phases(cls, phases, amplitude=1.0):
        return cls(amplitude * np.exp(1j * np.asarray(phases, dtype=float)))

    @property
    def phase(self):
        return np.angle(self.gamma)

    @property
    def amplitude(self):
        return np.abs(self.gamma)

    def grid(self, geom):
        return self.gamma.reshape(geom.shape)


def capacitance(v_bias, p):
    """Junction capacitance (F) at reverse bias ``v_bias`` (V).

    Raises
    ------
    BiasRangeError
        If any bias lies outside ``[p.v_min, p.v_max]``.
    """
    v = p.check_range(v_bias)
    return p.c_j0 * (1.0 + v / p.v_j) ** (-p.grading)


def surface_admittance(c, p):
    """Admittance ``1/Z`` of the parallel tank; finite even at lossless resonance."""
    c = np.asarray(c, dtype=float)
    w = p.omega
    return (1 - w ** 2 * p.inductance * c + 1j * w * p.loss_resistance * c) / (
        p.loss_resistance + 1j * w * p.inductance)


def reflection(c, p):
    """Complex reflection coefficient of the unit cell for capacitance ``c``.

    ``Z = (R + jwL) / (1 - w^2 L C + jwRC)`` and ``Gamma = (Z - eta)/(Z + eta)``,
    evaluated in admittance form so that ``Z -> inf`` gives ``Gamma = 1``.
    """
    if np.any(np.asarray(c) <= 0):
        raise ValueError("capacitance must be > 0")
    y = p.free_space_impedance * surface_admittance(c, p)
    return (1 - y) / (1 + y)


def ideal_reflection(v_bias, p):
    """Lossless linear bias-to-phase map, ``-pi`` at ``v_min`` to ``+pi`` at ``v_max``."""
    v = p.check_range(v_bias)
    return np.exp(1j * ideal_phase(v, p))


def ideal_phase(v_bias, p):
    return -np.pi + 2 * np.pi * (np.asarray(v_bias, dtype=float) - p.v_min) / (p.v_max - p.v_min)


def ideal_phase_to_bias(phase, p):
    """Inverse of the ideal map for phases in ``[-pi, pi]``."""
    return p.v_min + (np.asarray(phase, dtype=float) + np.pi) / (2 * np.pi) * (p.v_max - p.v_min)


def _smooth_axis(arr, taps, axis):
    """Convolve along ``axis`` with taps renormalized over the in-grid support."""
    w = taps.size // 2
    arr = np.moveaxis(arr, axis, 0)
    n = arr.shape[0]
    num = np.zeros_like(arr)
    den = np.zeros(n)
    for k in range(-w, w + 1):
        t = taps[k + w]
        lo, hi = max(0, -k), min(n, n - k)
        if lo >= hi or t == 0:
            continue
        num[lo:hi] += t * arr[lo + k:hi + k]
        den[lo:hi] += t
    shape = (n,) + (1,) * (arr.ndim - 1)
    return np.moveaxis(num / den.reshape(shape), 0, axis)


def apply_coupling(raw, kernel, geom):
    """Smooth a reflection profile over the grid with a separable coupling kernel.

    Edges renormalize the kernel over in-grid taps, so a uniform profile is
    left unchanged everywhere.
    """
    gamma = np.asarray(getattr(raw, "gamma", raw), dtype=np.complex128)
    if gamma.size != geom.n:
        raise DimensionError("raw", f"length {gamma.size} does not match N={geom.n}")
    grid = gamma.reshape(geom.shape)
    if kernel.half_width > 0:
        grid = _smooth_axis(grid, kernel.taps, 0)
        grid = _smooth_axis(grid, kernel.taps, 1)
    # Convex combinations can exceed the unit disk by round-off only.
    out = grid.ravel()
    mag = np.abs(out)
    out = np.where(mag > 1.0, out / np.maximum(mag, 1.0), out)
    return PhaseProfile(out)


@dataclass(frozen=True)
class UnitCellModel:
    """Full bias -> reflection stack.

    ``resonator=None`` selects the ideal linear map; ``coupling=None`` skips
    the smoothing step.
    """

    varactor: VaractorParams = VaractorParams()
    resonator: CellResonatorParams | None = CellResonatorParams()
    coupling: CouplingKernel | None = None

    def __post_init__(self):
        if self.resonator is not None:
            c_min, c_max = self.varactor.capacitance_range
            c_res = self.resonator.resonance_capacitance
            if not c_min < c_res < c_max:
                raise ConfigurationError(
                    f"resonance capacitance {c_res:.4g} F outside varactor range "
                    f"({c_min:.4g}, {c_max:.4g}) F")

    @classmethod
    def ideal(cls, varactor=None, coupling=None):
        return cls(varactor or VaractorParams(), None, coupling)

    @property
    def is_ideal(self):
        return self.resonator is None

    def element_reflection(self, v_bias):
        """Reflection per element before coupling."""
        if self.resonator is None:
            return ideal_reflection(v_bias, self.varactor)
        return reflection(capacitance(v_bias, self.varactor), self.resonator)

    def profile(self, bias, geom):
        """Realized PhaseProfile for a per-element bias vector (length N)."""
        raw = self.element_reflection(bias)
        if self.coupling is None:
            return PhaseProfile(raw)
        return apply_coupling(raw, self.coupling, geom)
