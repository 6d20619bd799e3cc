"""Standing-wave biasing of the varactor lines.

A biasing line of length ``l_total = l_x + 2*l_e`` is shorted at both ends and
carries resonant modes ``sin(k_p x)`` with ``k_p = p*pi/l_total``.  The
instantaneous line voltage is

    v(x, t) = V_0 + sum_p V_p sin(k_p x + phi_e_p) cos(w_p t + phi_v_p)

and each element sees the envelope-detected value at its cell center, with
the temporal phase reduced to a sign.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channels import SPEED_OF_LIGHT
from .errors import ConfigurationError, ModeFrequencyWarning, RankError, RealizabilityError
from .cell_model import BIAS_TOL

BOUNDARIES = ("short", "free")


@dataclass(frozen=True)
class BiasLineConfig:
    """Biasing transmission line along x.

    ``boundary="short"`` forces every spatial phase to zero so the modes vanish
    at both terminations; ``"free"`` keeps the configured spatial phases.
    """

    l_x: float
    l_e: float = 0.0
    phase_velocity: float = SPEED_OF_LIGHT / 2
    boundary: str = "short"

    def __post_init__(self):
        if not self.l_x > 0:
            raise ConfigurationError(f"l_x must be > 0, got {self.l_x!r}")
        if not self.l_e >= 0:
            raise ConfigurationError(f"l_e must be >= 0, got {self.l_e!r}")
        if not self.phase_velocity > 0:
            raise ConfigurationError(f"phase_velocity must be > 0, got {self.phase_velocity!r}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @classmethod
    def for_geometry(cls, geom, l_e=None, phase_velocity=SPEED_OF_LIGHT / 2, boundary="short"):
        """Line matched to the RIS aperture; ``l_e`` defaults to one cell pitch."""
        return cls(geom.l_x, geom.d_x if l_e is None else l_e, phase_velocity, boundary)

    @property
    def l_total(self):
        return self.l_x + 2 * self.l_e

    def wavenumber(self, p):
        return np.asarray(p) * np.pi / self.l_total

    def omega(self, p):
        return self.wavenumber(p) * self.phase_velocity

    def to_dict(self):
        return {"l_x": self.l_x, "l_e": self.l_e, "phase_velocity": self.phase_velocity,
                "boundary": self.boundary}


@dataclass(frozen=True)
class BiasMode:
    p: int
    amplitude: float
    phi_e: float = 0.0
    phi_v: float = 0.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ConfigurationError(f"mode index must be a positive integer, got {self.p!r}")
        if not self.amplitude >= 0:
            raise ConfigurationError(f"mode amplitude must be >= 0, got {self.amplitude!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "amplitude", float(self.amplitude))

    @property
    def sign(self):
        """Detected polarity of the mode: +1 if ``cos(phi_v) >= 0`` else -1."""
        return 1.0 if np.cos(self.phi_v) >= 0 else -1.0

    @property
    def signed_amplitude(self):
        return self.sign * self.amplitude


@dataclass(frozen=True)
class BiasWaveConfig:
    v_0: float
    modes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        modes = tuple(self.modes)
        indices = [m.p for m in modes]
        if len(set(indices)) != len(indices):
            raise ConfigurationError(f"mode indices must be distinct, got {indices}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "v_0", float(self.v_0))

    @classmethod
    def from_signed(cls, v_0, amplitudes, indices=None):
        """Build from signed amplitudes; negative values become ``phi_v = pi``."""
        amplitudes = np.asarray(amplitudes, dtype=float).ravel()
        if indices is None:
            indices = range(1, amplitudes.size + 1)
        modes = tuple(BiasMode(p, abs(a), 0.0, 0.0 if a >= 0 else np.pi)
                      for p, a in zip(indices, amplitudes))
        return cls(v_0, modes)

    @property
    def n_modes(self):
        return len(self.modes)

    def signed_amplitudes(self, n_modes=None):
        """Signed amplitudes indexed by ``p - 1``, zero-padded to ``n_modes``."""
        top = max([m.p for m in self.modes], default=0)
        out = np.zeros(max(top, n_modes or 0))
        for m in self.modes:
            out[m.p - 1] = m.signed_amplitude
        return out

    def envelope(self):
        """``(V_0 - sum V_p, V_0 + sum V_p)``; bounds the line voltage for all x, t."""
        total = sum(m.amplitude for m in self.modes)
        return self.v_0 - total, self.v_0 + total

    def to_dict(self):
        return {"v0": self.v_0,
                "modes": [{"p": m.p, "amp": m.amplitude, "phi_e": m.phi_e, "phi_v": m.phi_v}
                          for m in self.modes]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["v0"], tuple(BiasMode(m["p"], m["amp"], m.get("phi_e", 0.0), m.get("phi_v", 0.0))
                                  for m in d.get("modes", [])))


def _spatial_phase(mode, line):
    return mode.phi_e if line.boundary == "free" else 0.0


def instantaneous_wave(cfg, line, x, t):
    """Line voltage ``v(x, t)``; ``x`` and ``t`` broadcast against each other."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(x < 0) or np.any(x > line.l_total):
        raise ValueError(f"x must lie on the line [0, {line.l_total}] m")
    v = np.full(np.broadcast(x, t).shape, cfg.v_0)
    for m in cfg.modes:
        v = v + m.amplitude * np.sin(line.wavenumber(m.p) * x + _spatial_phase(m, line)) \
            * np.cos(line.omega(m.p) * t + m.phi_v)
    return v


def mode_inner_product(p, q, line):
    """Closed-form ``integral_0^L sin(k_p x) sin(k_q x) dx`` over the whole line.

    Equals ``(L/2) * (sinc(p - q) - sinc(p + q))``: ``L/2`` on the diagonal and
    zero between distinct modes.
    """
    return line.l_total / 2 * (np.sinc(p - q) - np.sinc(p + q))


def element_positions(geom, line):
    """Line coordinate of each cell center: ``l_e + (m + 1/2) d_x``."""
    if not np.isclose(geom.l_x, line.l_x, rtol=1e-9, atol=0):
        raise ConfigurationError(
            f"geometry aperture n_x*d_x = {geom.l_x!r} m does not match line l_x = {line.l_x!r} m")
    return line.l_e + (np.arange(geom.n_x) + 0.5) * geom.d_x


def sine_basis(line, geom, n_modes):
    """Matrix ``S[m, p-1] = sin(k_p x_m)`` sampled at the cell centers."""
    x = element_positions(geom, line)
    p = np.arange(1, n_modes + 1)
    return np.sin(np.outer(x, line.wavenumber(p)))


def effective_bias(cfg, line, geom, varactor=None):
    """Envelope-detected DC bias per x position (length ``n_x``).

    Each mode contributes ``s_p V_p sin(k_p x_m)`` with ``s_p`` the sign of
    ``cos(phi_v_p)``.  With ``varactor`` given, every value must fall inside its
    bias range or a RealizabilityError lists the offending elements.
    """
    x = element_positions(geom, line)
    v = np.full(geom.n_x, cfg.v_0)
    for m in cfg.modes:
        v += m.signed_amplitude * np.sin(line.wavenumber(m.p) * x + _spatial_phase(m, line))
    if varactor is not None:
        v = check_bias(v, varactor)
    return v


def check_bias(v, varactor):
    bad = np.flatnonzero((v < varactor.v_min - BIAS_TOL) | (v > varactor.v_max + BIAS_TOL))
    if bad.size:
        raise RealizabilityError(bad.tolist(), v[bad].tolist(), varactor.v_min, varactor.v_max)
    return np.clip(v, varactor.v_min, varactor.v_max)


def bias_grid(cfg, line, geom, varactor=None):
    """Per-element bias (length N): every row along y shares the x profile."""
    return np.repeat(effective_bias(cfg, line, geom, varactor), geom.n_y)


def check_realizable(cfg, line, varactor, n_x_samples=513, n_t_samples=256):
    """Check the instantaneous wave stays inside the varactor range.

    The envelope bound ``V_0 +/- sum V_p`` is tried first; if it is not
    conclusive the line is sampled densely over one period of the lowest mode.
    Returns True or raises RealizabilityError.
    """
    lo, hi = cfg.envelope()
    if lo >= varactor.v_min - BIAS_TOL and hi <= varactor.v_max + BIAS_TOL:
        return True
    x = np.linspace(0, line.l_total, n_x_samples)
    if cfg.modes:
        period = 2 * np.pi / line.omega(min(m.p for m in cfg.modes))
        t = np.linspace(0, period, n_t_samples, endpoint=False)
    else:
        t = np.zeros(1)
    v = instantaneous_wave(cfg, line, x[:, None], t[None, :])
    v_lo, v_hi = v.min(axis=1), v.max(axis=1)
    bad = np.flatnonzero((v_lo < varactor.v_min - BIAS_TOL) | (v_hi > varactor.v_max + BIAS_TOL))
    if bad.size:
        worst = np.where(v_lo[bad] < varactor.v_min, v_lo[bad], v_hi[bad])
        raise RealizabilityError(bad.tolist(), worst.tolist(), varactor.v_min, varactor.v_max)
    return True


def mode_frequencies(cfg, line):
    """Resonant frequency (Hz) of every configured mode."""
    return np.array([line.omega(m.p) / (2 * np.pi) for m in cfg.modes])


def check_mode_frequencies(n_modes, line, rf_frequency, max_ratio=0.1):
    """Warn when the highest mode frequency is not well below the RF carrier."""
    if n_modes < 1:
        return True
    f_top = line.omega(n_modes) / (2 * np.pi)
    if f_top > max_ratio * rf_frequency:
        warnings.warn(f"mode {n_modes} resonates at {f_top:.4g} Hz, above "
                      f"{max_ratio:g} x RF carrier {rf_frequency:.4g} Hz", ModeFrequencyWarning,
                      stacklevel=2)
        return False
    return True


def fit_modes(target_bias, line, geom, n_modes):
    """Least-squares fit of a target x-profile by ``n_modes`` sine modes.

    Returns
    -------
    cfg : BiasWaveConfig
        Fitted DC level and signed mode amplitudes (modes ``1..n_modes``).
    residual : float
        2-norm of ``target - effective_bias(cfg)``.

    Notes
    -----
    Below a complete basis the DC level is fitted jointly with the modes, so
    any target in ``span{1, sin(k_1 x), ..., sin(k_P x)}`` is recovered
    exactly.  With ``n_modes == n_x`` the sines alone span the samples; the DC
    level is then fixed to the target mean and the modes absorb the rest.
    """
    target = np.asarray(target_bias, dtype=float)
    if target.shape != (geom.n_x,):
        raise ValueError(f"target must have length n_x={geom.n_x}, got shape {target.shape}")
    if not 0 <= n_modes <= geom.n_x:
        raise ConfigurationError(f"mode count must lie in [0, n_x={geom.n_x}], got {n_modes}")
    if n_modes == 0:
        cfg = BiasWaveConfig(float(target.mean()))
        return cfg, float(np.linalg.norm(target - target.mean()))
    S = sine_basis(line, geom, n_modes)
    if np.linalg.matrix_rank(S) < n_modes:
        raise RankError(f"sampled sine basis with {n_modes} modes is singular on this geometry "
                        f"(cond={np.linalg.cond(S):.3g})")
    A = np.column_stack([np.ones(geom.n_x), S])
    if n_modes < geom.n_x and np.linalg.matrix_rank(A) == n_modes + 1:
        coef = np.linalg.lstsq(A, target, rcond=None)[0]
        v_0, amps = coef[0], coef[1:]
    else:
        v_0 = target.mean()
        amps = np.linalg.lstsq(S, target - v_0, rcond=None)[0]
    cfg = BiasWaveConfig.from_signed(v_0, amps)
    residual = float(np.linalg.norm(target - effective_bias(cfg, line, geom)))
    return cfg, residual


@dataclass(frozen=True, eq=False)
class ProductBiasConfig:
    """Separable 2-D extension: ``V_0 + sum_pq a_pq sin(k_p x) sin(k_q y)``.

    Not part of the row-shared line architecture; provided for studies that
    drive a second set of lines along y.
    """

    v_0: float
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=float, ndmin=2)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)


def product_bias(cfg, line_x, line_y, geom, varactor=None):
    """Per-element bias (length N, row-major) for a ProductBiasConfig."""
    p, q = cfg.amplitudes.shape
    sx = sine_basis(line_x, geom, p)
    y = line_y.l_e + (np.arange(geom.n_y) + 0.5) * geom.d_y
    if not np.isclose(geom.n_y * geom.d_y, line_y.l_x, rtol=1e-9, atol=0):
        raise ConfigurationError(
            f"geometry aperture n_y*d_y = {geom.n_y * geom.d_y!r} m does not match y-line "
            f"length {line_y.l_x!r} m")
    sy = np.sin(np.outer(y, line_y.wavenumber(np.arange(1, q + 1))))
    v = (cfg.v_0 + sx @ cfg.amplitudes @ sy.T).ravel()
    if varactor is not None:
        v = check_bias(v, varactor)
    return v
