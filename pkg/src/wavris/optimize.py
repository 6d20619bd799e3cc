"""Per-element optimum, reduced-dimension bias-mode search and cascaded estimation.

The mode search works on the vector ``x = [V_0, a_1, ..., a_P]`` of DC level
and *signed* mode amplitudes; a negative ``a_p`` is the detected polarity
``s_p = -1`` of a mode with amplitude ``|a_p|``.  Objectives are evaluated on
the normalized gain ``|f|^2`` (no link-budget factor) divided by the
per-element optimum, so the search path is independent of transmit power.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .bias_wave import BiasWaveConfig, bias_grid, check_bias, fit_modes, sine_basis
from .cell_model import PhaseProfile, ideal_phase_to_bias
from .channels import LinkBudget, effective_channel
from .errors import ConditioningWarning, ConfigurationError, DegenerateChannelError, RealizabilityError

METHODS = ("simplex-descent", "finite-difference-ascent", "coordinate-scan")

# Sign patterns are enumerated exhaustively up to this many modes.
MAX_ENUMERATED_SIGNS = 8

_UNIT_BUDGET = LinkBudget(1.0, 1.0)


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 3
    max_iters: int = 2000
    tolerance: float = 1e-8
    seed: int = 0
    method: str = "simplex-descent"

    def __post_init__(self):
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise ConfigurationError(f"restarts must be >= 1, got {self.restarts!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters!r}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be > 0, got {self.tolerance!r}")
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass
class OptimizationResult:
    best_config: BiasWaveConfig
    achieved_snr: float
    ideal_snr: float
    iterations_used: int
    converged: bool
    trace: list = field(default_factory=list)
    restart_snrs: list = field(default_factory=list)
    profile: PhaseProfile | None = field(default=None, repr=False)

    def to_dict(self, verbose=False):
        d = {"best_config": self.best_config.to_dict(), "achieved_snr": self.achieved_snr,
             "ideal_snr": self.ideal_snr, "iterations_used": self.iterations_used,
             "converged": self.converged, "restart_snrs": list(self.restart_snrs)}
        if verbose:
            d["trace"] = list(self.trace)
        return d


# ---------------------------------------------------------------------------
# per-element optimum


def _aligned_profile(c, h_d):
    """Closed-form SISO phases aligning every cascaded term with the direct path."""
    ref = np.angle(h_d) if h_d != 0 else 0.0
    return np.exp(1j * (ref - np.angle(c)))


def ideal_profile(chans, budget, tolerance=1e-12, max_iters=500):
    """Unconstrained per-element optimum.

    For a single BS antenna the phases are closed form and the SNR equals
    ``gamma * (|h_d| + sum_n |h_r[n] g[n]|)**2``.  With several BS antennas the
    profile and the matched beamformer are alternately maximized until the
    relative SNR change drops below ``tolerance``.

    Returns
    -------
    profile : PhaseProfile
    snr : float
        Linear SNR with a matched (MRT) beamformer.
    """
    casc = chans.cascaded()
    if not np.any(np.abs(casc) > 0) and not np.any(np.abs(chans.h_d) > 0):
        raise DegenerateChannelError("all cascaded coefficients and the direct path are zero")
    if chans.m == 1:
        c = casc[:, 0]
        h_d = chans.h_d[0]
        gamma = _aligned_profile(c, h_d)
        f = effective_channel(chans, gamma)
        return PhaseProfile(gamma), budget.gamma * float(np.vdot(f, f).real)

    stacked = np.vstack([casc, chans.h_d[None, :]])
    w = np.linalg.svd(stacked)[2][0].conj()
    snr = -np.inf
    for _ in range(max_iters):
        gamma = _aligned_profile(casc @ w, chans.h_d @ w)
        f = effective_channel(chans, gamma)
        new = float(np.vdot(f, f).real)
        w = f.conj() / np.sqrt(new)
        if abs(new - snr) <= tolerance * new:
            snr = new
            break
        snr = new
    return PhaseProfile(gamma), budget.gamma * snr


# ---------------------------------------------------------------------------
# reduced-dimension search


class _Objective:
    """Normalized gain of a ``[V_0, a_1..a_P]`` vector through the full pipeline."""

    def __init__(self, chans, cell, line, geom, n_modes, beamformer, scale):
        self.chans = chans
        self.cell = cell
        self.geom = geom
        self.basis = sine_basis(line, geom, n_modes) if n_modes else np.zeros((geom.n_x, 0))
        self.v_min = cell.varactor.v_min
        self.v_max = cell.varactor.v_max
        self.beamformer = beamformer
        self.scale = scale
        self.evaluations = 0

    def bias(self, x):
        return x[0] + self.basis @ x[1:]

    def _excess(self, x):
        # the DC level is boxed as well as every detected element bias
        v = np.append(self.bias(x), x[0])
        return np.maximum(v - self.v_max, 0) + np.maximum(self.v_min - v, 0)

    def violation(self, x):
        return float(np.sum(self._excess(x)))

    def gain(self, x):
        """Normalized gain, or ``-violation`` (<= 0) for unrealizable biases."""
        self.evaluations += 1
        excess = self._excess(x)
        if np.any(excess > 1e-9):
            return -float(excess.sum())
        v = self.bias(x)
        v = np.clip(v, self.v_min, self.v_max)
        profile = self.cell.profile(np.repeat(v, self.geom.n_y), self.geom)
        f = effective_channel(self.chans, profile.gamma)
        if isinstance(self.beamformer, str):
            g = float(np.vdot(f, f).real)
        else:
            g = abs(f @ self.beamformer) ** 2
        return g / self.scale

    def __call__(self, x):
        return -self.gain(x)


def _fit_start(chans, cell, line, geom, n_modes, ideal):
    """Initial point from the per-element optimum, via the ideal map inverse.

    Rows along y share one x-profile, so the cascaded terms are first summed
    over y.  When there is no direct path the global phase is free and is
    chosen to keep the unwrapped x-profile inside one ideal-map period.
    """
    casc = chans.cascaded()
    gamma = ideal.gamma
    f = effective_channel(chans, gamma)
    w = f.conj() / np.linalg.norm(f) if np.linalg.norm(f) > 0 else np.ones(chans.m) / np.sqrt(chans.m)
    c_eff = (casc @ w).reshape(geom.shape).sum(axis=1)
    h_d = chans.h_d @ w
    if abs(h_d) > 0:
        theta = np.angle(h_d) - np.angle(c_eff)
        theta = np.angle(np.exp(1j * theta))
    else:
        theta = np.unwrap(-np.angle(c_eff))
        span = theta.max() - theta.min()
        if span <= 2 * np.pi:
            theta = theta - (theta.max() + theta.min()) / 2
        else:
            theta = np.angle(np.exp(1j * theta))
    target = ideal_phase_to_bias(theta, cell.varactor)
    cfg, _ = fit_modes(target, line, geom, n_modes)
    x = np.concatenate([[cfg.v_0], cfg.signed_amplitudes(n_modes)[:n_modes]])
    return _shrink_to_feasible(x, sine_basis(line, geom, n_modes) if n_modes else None, cell.varactor)


def _shrink_to_feasible(x, basis, varactor):
    """Clamp ``V_0`` into range and scale the modes down until the bias fits."""
    x = np.array(x, dtype=float)
    x[0] = np.clip(x[0], varactor.v_min, varactor.v_max)
    if basis is None or x.size == 1:
        return x
    swing = basis @ x[1:]
    room_hi = varactor.v_max - x[0]
    room_lo = x[0] - varactor.v_min
    peak_hi = max(swing.max(), 0.0)
    peak_lo = max(-swing.min(), 0.0)
    factor = 1.0
    if peak_hi > room_hi:
        factor = min(factor, room_hi / peak_hi)
    if peak_lo > room_lo:
        factor = min(factor, room_lo / peak_lo)
    if factor < 1:
        x[1:] *= max(factor, 0.0) * (1 - 1e-12)
    return x


def _random_start(rng, n_modes, varactor):
    mid = rng.uniform(varactor.v_min, varactor.v_max)
    room = min(mid - varactor.v_min, varactor.v_max - mid)
    if n_modes == 0:
        return np.array([mid])
    a = rng.uniform(-1, 1, n_modes)
    a *= room * rng.uniform(0.2, 1.0) / max(np.abs(a).sum(), 1e-300)
    return np.concatenate([[mid], a])


def _initial_simplex(obj, x0, step):
    pts = [x0]
    for i in range(x0.size):
        for s in (step, -step, step / 10, -step / 10):
            p = x0.copy()
            p[i] += s
            if obj.violation(p) == 0:
                break
        pts.append(p)
    return np.array(pts)


def _run_simplex(obj, x0, opt, step):
    trace = []
    best = [obj.gain(x0)]

    def callback(intermediate_result):
        best[0] = max(best[0], -intermediate_result.fun)
        trace.append(best[0])

    res = minimize(obj, x0, method="Nelder-Mead", callback=callback,
                   options={"maxiter": opt.max_iters, "xatol": np.inf, "fatol": opt.tolerance,
                            "initial_simplex": _initial_simplex(obj, x0, step),
                            "adaptive": x0.size > 4})
    x = res.x if -res.fun >= obj.gain(x0) else x0
    return x, res.nit, bool(res.success), trace


def _run_fd_ascent(obj, x0, opt, step):
    x = x0.copy()
    fx = obj.gain(x)
    h = 1e-6 * step
    trace = []
    converged = False
    it = 0
    lr = step
    for it in range(1, opt.max_iters + 1):
        grad = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            grad[i] = (obj.gain(x + e) - obj.gain(x - e)) / (2 * h)
        norm = np.linalg.norm(grad)
        if norm == 0:
            converged = True
            trace.append(fx)
            break
        direction = grad / norm
        improved = False
        while lr > 1e-12 * step:
            cand = x + lr * direction
            fc = obj.gain(cand)
            if fc > fx:
                improved = True
                break
            lr /= 2
        if not improved:
            converged = True
            trace.append(fx)
            break
        change = (fc - fx) / max(abs(fc), 1e-300)
        x, fx = cand, fc
        trace.append(fx)
        lr *= 2
        if change < opt.tolerance:
            converged = True
            break
    return x, it, converged, trace


def _run_coordinate_scan(obj, x0, opt, step):
    x = x0.copy()
    fx = obj.gain(x)
    trace = []
    converged = False
    it = 0
    for it in range(1, opt.max_iters + 1):
        before = fx
        for i in range(x.size):
            for s in (step, -step):
                cand = x.copy()
                cand[i] += s
                fc = obj.gain(cand)
                if fc > fx:
                    x, fx = cand, fc
                    break
        trace.append(fx)
        if fx == before:
            step /= 2
            if step < 1e-9:
                converged = True
                break
        elif (fx - before) / max(abs(fx), 1e-300) < opt.tolerance:
            converged = True
            break
    return x, it, converged, trace


_RUNNERS = {"simplex-descent": _run_simplex,
            "finite-difference-ascent": _run_fd_ascent,
            "coordinate-scan": _run_coordinate_scan}


def _polish_signs(obj, x):
    """Try flipping mode polarities: all patterns for few modes, greedy otherwise."""
    n = x.size - 1
    if n == 0:
        return x, obj.gain(x)
    best_x, best = x, obj.gain(x)
    if n <= MAX_ENUMERATED_SIGNS:
        for signs in itertools.product((1.0, -1.0), repeat=n):
            cand = np.concatenate([[x[0]], x[1:] * np.array(signs)])
            g = obj.gain(cand)
            if g > best:
                best_x, best = cand, g
        return best_x, best
    improved = True
    while improved:
        improved = False
        for i in range(1, n + 1):
            cand = best_x.copy()
            cand[i] = -cand[i]
            g = obj.gain(cand)
            if g > best:
                best_x, best, improved = cand, g, True
    return best_x, best


def optimize_modes(chans, cell, line, geom, n_modes, budget, opt=OptimizerConfig(),
                   warm_start=None, beamformer="matched"):
    """Maximize link SNR over the DC level and ``n_modes`` signed mode amplitudes.

    Starting points, in order: ``warm_start`` (if given, padded with zero
    modes), the fitted projection of the per-element optimum, the zero-mode
    profile centered in the bias range, then random draws.  ``opt.restarts``
    counts the non-warm starts; restart ``k`` draws from
    ``default_rng([opt.seed, k])`` so adding restarts never changes earlier ones.
    """
    if n_modes < 0:
        raise ConfigurationError("mode count must be >= 0")
    if n_modes > geom.n_x:
        raise ConfigurationError(f"mode count {n_modes} exceeds n_x={geom.n_x}")
    vr = cell.varactor
    ideal, ideal_gain = ideal_profile(chans, _UNIT_BUDGET)
    obj = _Objective(chans, cell, line, geom, n_modes, beamformer, ideal_gain)

    starts = []
    if warm_start is not None:
        amps = warm_start.signed_amplitudes(n_modes)
        if amps.size > n_modes:
            raise ConfigurationError("warm start has more modes than requested")
        starts.append(np.concatenate([[warm_start.v_0], amps]))
    for k in range(opt.restarts):
        if k == 0:
            starts.append(_fit_start(chans, cell, line, geom, n_modes, ideal))
        elif k == 1:
            starts.append(np.concatenate([[(vr.v_min + vr.v_max) / 2], np.zeros(n_modes)]))
        else:
            starts.append(_random_start(np.random.default_rng([opt.seed, k]), n_modes, vr))

    if all(obj.violation(x) > 1e-9 for x in starts):
        raise RealizabilityError([], [], vr.v_min, vr.v_max)

    step = 0.05 * (vr.v_max - vr.v_min)
    runner = _RUNNERS[opt.method]
    best = None
    restart_snrs = []
    for x0 in starts:
        if obj.violation(x0) > 1e-9:
            x0 = _shrink_to_feasible(x0, obj.basis if n_modes else None, vr)
        x, nit, converged, trace = runner(obj, x0, opt, step)
        x, g = _polish_signs(obj, x)
        g0 = obj.gain(x0)
        if g0 > g:
            x, g = x0, g0
        restart_snrs.append(budget.gamma * ideal_gain * g)
        if best is None or g > best[1]:
            best = (x, g, nit, converged, trace)

    x, g, nit, converged, trace = best
    cfg = BiasWaveConfig.from_signed(x[0], x[1:])
    bias = bias_grid(cfg, line, geom, vr)
    profile = cell.profile(bias, geom)
    snr_scale = budget.gamma * ideal_gain
    return OptimizationResult(
        best_config=cfg,
        achieved_snr=snr_scale * g,
        ideal_snr=budget.gamma * ideal_gain,
        iterations_used=int(nit),
        converged=converged,
        trace=[snr_scale * t for t in trace],
        restart_snrs=restart_snrs,
        profile=profile,
    )


# ---------------------------------------------------------------------------
# cascaded channel estimation


@dataclass
class EstimationResult:
    coefficients: np.ndarray
    residual: float
    rank: int
    condition_number: float
    underdetermined: bool
    direct: complex | None = None
    noise_normalized_residual: float | None = None


def design_matrix(probe_configs, cell, line, geom):
    """Rows are the realized reflection vectors of each probe configuration."""
    rows = [cell.profile(bias_grid(cfg, line, geom, cell.varactor), geom).gamma for cfg in probe_configs]
    return np.array(rows, dtype=np.complex128).reshape(len(rows), geom.n)


def estimate_cascaded(probe_configs, observations, cell, line, geom, noise_power=None,
                      include_direct=False):
    """Least-squares estimate of the cascaded coefficients ``c_n = h_r[n] g[n]``.

    Observation ``t`` is modelled as ``y_t = sum_n Gamma_t[n] c_n`` (plus the
    direct path when ``include_direct``).  Fewer probes than unknowns gives
    the minimum-norm solution flagged as under-determined; a rank-deficient
    design with enough probes emits a ConditioningWarning.
    """
    y = np.asarray(observations, dtype=np.complex128).ravel()
    if len(probe_configs) < 1:
        raise ValueError("need at least one probe")
    if y.size != len(probe_configs):
        raise ValueError(f"{y.size} observations for {len(probe_configs)} probes")
    A = design_matrix(probe_configs, cell, line, geom)
    if include_direct:
        A = np.column_stack([A, np.ones(len(y))])
    t, n_unknown = A.shape
    coef, _, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
    if t >= n_unknown and rank < n_unknown:
        warnings.warn(ConditioningWarning(
            f"design matrix rank {rank} < {n_unknown} unknowns (cond={cond:.3g})", cond), stacklevel=2)
    residual = float(np.linalg.norm(y - A @ coef))
    direct = None
    if include_direct:
        coef, direct = coef[:-1], complex(coef[-1])
    nnr = None
    if noise_power:
        dof = max(t - rank, 1)
        nnr = residual / np.sqrt(dof * noise_power)
    return EstimationResult(coef, residual, int(rank), cond, t < n_unknown, direct, nnr)


def single_mode_probes(n_probes, geom, line, varactor, seed=0, depth=0.45):
    """Distinct single-mode probe configurations cycling through ``p = 1..n_x``.

    The first cycle uses a centered DC level and a fixed amplitude of
    ``depth`` times the bias range; later cycles draw DC level, amplitude and
    polarity at random (within the realizable range).
    """
    rng = np.random.default_rng(seed)
    mid = (varactor.v_min + varactor.v_max) / 2
    span = varactor.v_max - varactor.v_min
    probes = []
    for t in range(n_probes):
        p = t % geom.n_x + 1
        if t < geom.n_x:
            cfg = BiasWaveConfig.from_signed(mid, [depth * span], [p])
        else:
            v0 = rng.uniform(varactor.v_min + 0.1 * span, varactor.v_max - 0.1 * span)
            room = min(v0 - varactor.v_min, varactor.v_max - v0)
            a = rng.uniform(0.3, 1.0) * room * rng.choice([-1.0, 1.0])
            cfg = BiasWaveConfig.from_signed(v0, [a], [p])
        check_bias(np.asarray(bias_grid(cfg, line, geom)), varactor)
        probes.append(cfg)
    return probes


def pilot_observations(chans, probe_configs, cell, line, geom, noise_power=0.0, seed=None,
                       beamformer=None):
    """Synthesize received pilots ``y_t = f_t . w + noise`` for each probe.

    ``beamformer`` defaults to the first BS antenna (SISO).
    """
    w = np.zeros(chans.m, dtype=np.complex128)
    w[0] = 1.0
    if beamformer is not None:
        w = np.asarray(beamformer, dtype=np.complex128)
    A = design_matrix(probe_configs, cell, line, geom)
    y = np.array([effective_channel(chans, row) @ w for row in A])
    if noise_power > 0:
        rng = np.random.default_rng(seed)
        y = y + np.sqrt(noise_power / 2) * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    return y
