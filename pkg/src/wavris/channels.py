"""Geometric multipath channels for the BS -> RIS -> UE link and link SNR.

Channels are far-field sums of plane waves over a rectangular RIS.  Elements
are indexed row-major over an ``(n_x, n_y)`` grid, i.e. flat index
``m * n_y + n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError

SPEED_OF_LIGHT = 299_792_458.0

GAIN_MODELS = ("equal", "unit", "rayleigh")


@dataclass(frozen=True)
class RisGeometry:
    """Rectangular RIS grid: element counts, pitches (m) and carrier wavelength (m)."""

    n_x: int
    n_y: int
    d_x: float
    d_y: float
    wavelength: float

    def __post_init__(self):
        if int(self.n_x) != self.n_x or self.n_x < 1:
            raise ConfigurationError(f"n_x must be a positive integer, got {self.n_x!r}")
        if int(self.n_y) != self.n_y or self.n_y < 1:
            raise ConfigurationError(f"n_y must be a positive integer, got {self.n_y!r}")
        for name in ("d_x", "d_y", "wavelength"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)!r}")
        object.__setattr__(self, "n_x", int(self.n_x))
        object.__setattr__(self, "n_y", int(self.n_y))

    @classmethod
    def from_frequency(cls, n_x, n_y, frequency, pitch_wavelengths=0.2):
        """Square-pitch geometry with pitch given as a fraction of the wavelength."""
        lam = SPEED_OF_LIGHT / frequency
        return cls(n_x, n_y, pitch_wavelengths * lam, pitch_wavelengths * lam, lam)

    @property
    def n(self):
        return self.n_x * self.n_y

    @property
    def l_x(self):
        """Aperture length along x."""
        return self.n_x * self.d_x

    @property
    def shape(self):
        return (self.n_x, self.n_y)

    def element_coordinates(self):
        """Return flat ``(x, y)`` element coordinates in row-major order."""
        m, n = np.meshgrid(np.arange(self.n_x), np.arange(self.n_y), indexing="ij")
        return m.ravel() * self.d_x, n.ravel() * self.d_y

    def to_dict(self):
        return {"n_x": self.n_x, "n_y": self.n_y, "d_x": self.d_x, "d_y": self.d_y,
                "wavelength": self.wavelength}


def _frozen_array(values, dtype):
    arr = np.array(values, dtype=dtype, ndmin=1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PathSet:
    """Propagation paths: complex gains with azimuth/elevation angles (radians)."""

    gains: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray

    def __post_init__(self):
        gains = _frozen_array(self.gains, np.complex128)
        az = _frozen_array(self.azimuth, np.float64)
        el = _frozen_array(self.elevation, np.float64)
        if not (gains.shape == az.shape == el.shape) or gains.ndim != 1:
            raise DimensionError("PathSet", "gains, azimuth and elevation must be equal-length 1-D")
        if gains.size < 1:
            raise ConfigurationError("PathSet needs at least one path")
        if np.any(az < -np.pi) or np.any(az >= np.pi):
            raise ConfigurationError("azimuth must lie in [-pi, pi)")
        if np.any(np.abs(el) > np.pi / 2):
            raise ConfigurationError("elevation must lie in [-pi/2, pi/2]")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @property
    def count(self):
        return self.gains.size

    def __or__(self, other):
        return PathSet(np.concatenate([self.gains, other.gains]),
                       np.concatenate([self.azimuth, other.azimuth]),
                       np.concatenate([self.elevation, other.elevation]))


@dataclass(frozen=True)
class ChannelSpec:
    """Recipe for drawing a random PathSet.

    ``gain_model`` is one of ``"equal"`` (equal magnitude ``1/sqrt(n_paths)``,
    uniform phase), ``"unit"`` (gain exactly 1) or ``"rayleigh"``
    (CN(0, 1/n_paths)).  ``distance`` switches on spherical wavefronts from a
    source at that range; ``None`` is the far-field default.
    """

    n_paths: int = 5
    gain_model: str = "equal"
    azimuth_range: tuple = (-np.pi / 3, np.pi / 3)
    elevation_range: tuple = (-np.pi / 4, np.pi / 4)
    distance: float | None = None

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigurationError(f"n_paths must be >= 1, got {self.n_paths!r}")
        if self.gain_model not in GAIN_MODELS:
            raise ConfigurationError(f"gain_model must be one of {GAIN_MODELS}, got {self.gain_model!r}")
        lo, hi = self.azimuth_range
        if not -np.pi <= lo <= hi < np.pi:
            raise ConfigurationError("azimuth_range must satisfy -pi <= lo <= hi < pi")
        lo, hi = self.elevation_range
        if not -np.pi / 2 <= lo <= hi <= np.pi / 2:
            raise ConfigurationError("elevation_range must satisfy -pi/2 <= lo <= hi <= pi/2")
        if self.distance is not None and not self.distance > 0:
            raise ConfigurationError("distance must be > 0 when given")
        object.__setattr__(self, "azimuth_range", tuple(float(v) for v in self.azimuth_range))
        object.__setattr__(self, "elevation_range", tuple(float(v) for v in self.elevation_range))


@dataclass(frozen=True)
class LinkBudget:
    tx_power: float = 1.0
    noise_power: float = 1.0

    def __post_init__(self):
        if not (self.tx_power > 0 and self.noise_power > 0):
            raise ConfigurationError("tx_power and noise_power must be strictly positive")

    @property
    def gamma(self):
        """Linear SNR scale factor ``tx_power / noise_power``."""
        return self.tx_power / self.noise_power


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """BS->RIS matrix ``g`` (N x M), RIS->UE vector ``h_r`` (N) and direct ``h_d`` (M)."""

    g: np.ndarray
    h_r: np.ndarray
    h_d: np.ndarray
    bs_paths: PathSet | None = field(default=None, repr=False)
    ue_paths: PathSet | None = field(default=None, repr=False)

    def __post_init__(self):
        g = np.array(self.g, dtype=np.complex128)
        if g.ndim == 1:
            g = g[:, None]
        h_r = np.array(self.h_r, dtype=np.complex128, ndmin=1)
        h_d = np.array(self.h_d, dtype=np.complex128, ndmin=1)
        if g.ndim != 2:
            raise DimensionError("g", f"expected a 2-D (N, M) matrix, got shape {g.shape}")
        if h_r.shape != (g.shape[0],):
            raise DimensionError("h_r", f"length {h_r.size} does not match N={g.shape[0]} rows of g")
        if h_d.shape != (g.shape[1],):
            raise DimensionError("h_d", f"length {h_d.size} does not match M={g.shape[1]} columns of g")
        for arr in (g, h_r, h_d):
            arr.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h_r", h_r)
        object.__setattr__(self, "h_d", h_d)

    @property
    def n(self):
        return self.g.shape[0]

    @property
    def m(self):
        return self.g.shape[1]

    def cascaded(self):
        """Element-wise cascaded channel ``h_r[n] * g[n, :]`` (N x M)."""
        return self.h_r[:, None] * self.g


def steering_vector(geom, azimuth, elevation):
    """Unit-modulus planar-array response for a plane wave.

    Element ``(m, n)`` has phase ``2*pi*(m*d_x*sin(az) + n*d_y*cos(az)*sin(el))/lambda``.

    Parameters
    ----------
    geom : RisGeometry
    azimuth, elevation : float
        Angles in radians.

    Returns
    -------
    numpy.ndarray
        Complex vector of length ``geom.n``, row-major over the grid.
    """
    x, y = geom.element_coordinates()
    phase = 2 * np.pi * (x * np.sin(azimuth) + y * np.cos(azimuth) * np.sin(elevation)) / geom.wavelength
    return np.exp(1j * phase)


def near_field_response(geom, azimuth, elevation, distance):
    """Spherical-wave response for a point source at ``distance`` metres.

    Phases are referenced to the grid origin, so the response tends to
    :func:`steering_vector` as ``distance`` grows.
    """
    x, y = geom.element_coordinates()
    ux = np.sin(azimuth)
    uy = np.cos(azimuth) * np.sin(elevation)
    uz = np.cos(azimuth) * np.cos(elevation)
    src = distance * np.array([ux, uy, uz])
    r = np.sqrt((src[0] - x) ** 2 + (src[1] - y) ** 2 + src[2] ** 2)
    return np.exp(-2j * np.pi * (r - distance) / geom.wavelength)


def ula_response(n_antennas, angle):
    """Half-wavelength uniform linear array response at the BS."""
    return np.exp(1j * np.pi * np.arange(n_antennas) * np.sin(angle))


def array_response(geom, paths, distance=None):
    """Sum of ``gain * steering_vector`` over a PathSet."""
    out = np.zeros(geom.n, dtype=np.complex128)
    for gain, az, el in zip(paths.gains, paths.azimuth, paths.elevation):
        if distance is None:
            out += gain * steering_vector(geom, az, el)
        else:
            out += gain * near_field_response(geom, az, el, distance)
    return out


def draw_paths(spec, rng):
    """Draw a PathSet according to ``spec`` from a numpy Generator."""
    k = spec.n_paths
    if spec.gain_model == "equal":
        gains = np.exp(2j * np.pi * rng.random(k)) / np.sqrt(k)
    elif spec.gain_model == "unit":
        gains = np.ones(k, dtype=np.complex128)
    else:
        gains = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2 * k)
    az = rng.uniform(*spec.azimuth_range, size=k)
    el = rng.uniform(*spec.elevation_range, size=k)
    # uniform() on a degenerate [pi-ish, pi) interval could touch the open bound
    az = np.where(az >= np.pi, np.nextafter(np.pi, 0), az)
    return PathSet(gains, az, el)


def sample_channel(geom, spec, seed):
    """Draw paths and return ``(PathSet, channel vector)``; deterministic in ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    paths = draw_paths(spec, rng)
    return paths, array_response(geom, paths, spec.distance)


def sample_channels(geom, seed, bs_spec=None, ue_spec=None, n_bs=1, direct=0.0):
    """Draw a full ChannelSet.

    The BS->RIS matrix is ``sum_p gain_p * a_ris(psi_p) a_bs(psi_p)^H`` with the
    BS ULA angle taken equal to the path azimuth.  ``direct`` is the magnitude
    of the direct BS->UE path (random phase per BS antenna path); 0 disables it.
    """
    bs_spec = bs_spec or ChannelSpec()
    ue_spec = ue_spec or bs_spec
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bs_paths = draw_paths(bs_spec, rng)
    ue_paths = draw_paths(ue_spec, rng)
    g = np.zeros((geom.n, n_bs), dtype=np.complex128)
    for gain, az, el in zip(bs_paths.gains, bs_paths.azimuth, bs_paths.elevation):
        ris = (steering_vector(geom, az, el) if bs_spec.distance is None
               else near_field_response(geom, az, el, bs_spec.distance))
        g += gain * np.outer(ris, ula_response(n_bs, az).conj())
    h_r = array_response(geom, ue_paths, ue_spec.distance)
    phase = rng.random()
    h_d = direct * ula_response(n_bs, rng.uniform(-np.pi / 3, np.pi / 3)) * np.exp(2j * np.pi * phase)
    return ChannelSet(g, h_r, h_d, bs_paths, ue_paths)


def effective_channel(chans, gamma):
    """Return ``f = h_r^T diag(gamma) G + h_d^T`` over the BS antennas."""
    gamma = np.asarray(getattr(gamma, "gamma", gamma), dtype=np.complex128)
    if gamma.shape != (chans.n,):
        raise DimensionError("profile", f"length {gamma.size} does not match N={chans.n}")
    return (chans.h_r * gamma) @ chans.g + chans.h_d


def link_snr(chans, profile, budget, beamformer="matched"):
    """Linear receive SNR for a reflection profile.

    With an explicit unit-norm beamformer ``w`` the SNR is
    ``gamma * |f . w|**2``; ``"matched"`` uses maximum-ratio transmission,
    giving ``gamma * ||f||**2``.
    """
    f = effective_channel(chans, profile)
    if isinstance(beamformer, str):
        if beamformer != "matched":
            raise ValueError(f"unknown beamformer {beamformer!r}")
        return budget.gamma * float(np.vdot(f, f).real)
    w = np.asarray(beamformer, dtype=np.complex128)
    if w.shape != (chans.m,):
        raise DimensionError("beamformer", f"length {w.size} does not match M={chans.m}")
    if not np.isclose(np.linalg.norm(w), 1.0, rtol=1e-9, atol=0):
        raise ValueError("beamformer must have unit norm")
    return budget.gamma * abs(f @ w) ** 2
