"""Phase-grid dumps and the low-wavenumber smoothness metric."""
from __future__ import annotations

import math

import numpy as np
from scipy.fft import dctn

_BORDER_PENALTY = 1e6


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _reliability_unwrap(psi):
    """Reliability-sorted region growing on a 2-D grid.

    Pixel reliability is the negated squared second difference over the 3x3
    neighbourhood (borders rank last); edges are visited from most to least
    reliable, with a stable sort, and merge their two regions with the
    2*pi offset that makes the edge step smallest.
    """
    m, n = psi.shape
    p = np.pad(psi, 1, mode="edge")
    c = p[1:-1, 1:-1]

    def second(a, b):
        return _wrap(a - c) - _wrap(c - b)

    rel = -(second(p[1:-1, :-2], p[1:-1, 2:]) ** 2 + second(p[:-2, 1:-1], p[2:, 1:-1]) ** 2
            + second(p[:-2, :-2], p[2:, 2:]) ** 2 + second(p[:-2, 2:], p[2:, :-2]) ** 2)
    rel[[0, -1], :] = -_BORDER_PENALTY
    rel[:, [0, -1]] = -_BORDER_PENALTY
    idx = np.arange(m * n).reshape(m, n)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    r = rel.ravel()
    order = np.argsort(-(r[a] + r[b]), kind="stable")

    flat = psi.ravel()
    k = np.zeros(m * n, dtype=np.int64)
    group = np.arange(m * n)
    members = {i: [i] for i in range(m * n)}
    for e in order:
        i, j = int(a[e]), int(b[e])
        gi, gj = group[i], group[j]
        if gi == gj:
            continue
        shift = int(np.round((flat[i] - flat[j]) / (2 * np.pi) + k[i] - k[j]))
        if len(members[gi]) < len(members[gj]):
            gi, gj, shift = gj, gi, -shift
        moved = members.pop(gj)
        k[moved] += shift
        group[moved] = gi
        members[gi].extend(moved)
    return (flat + 2 * np.pi * k).reshape(m, n)


def unwrap_phase_grid(phases):
    """Unwrap a phase grid; 1-D grids use ``numpy.unwrap``.

    The result differs from the input by integer multiples of 2*pi and is
    exact whenever neighbouring samples differ by less than pi.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.ndim == 1:
        return np.unwrap(phases)
    if min(phases.shape) == 1:
        return np.unwrap(phases.ravel()).reshape(phases.shape)
    return _reliability_unwrap(phases)


def _ramp_design(shape):
    m, n = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return np.column_stack([np.ones(m.size), m.ravel(), n.ravel()])


def detrend(grid):
    """Remove the mean and the least-squares linear ramp from a real grid."""
    grid = np.asarray(grid, dtype=float)
    A = _ramp_design(grid.shape)
    coef = np.linalg.lstsq(A, grid.ravel(), rcond=None)[0]
    return (grid.ravel() - A @ coef).reshape(grid.shape)


def low_block(shape):
    return math.ceil(shape[0] / 4), math.ceil(shape[1] / 4)


def smoothness_metric(phase_grid):
    """Fraction of detrended DCT-II energy in the lowest ceil(n_x/4) x ceil(n_y/4) modes.

    A grid that is entirely mean plus linear ramp has nothing left after
    detrending and scores 1.0.
    """
    grid = np.asarray(phase_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    resid = detrend(grid)
    scale = max(float(np.sum(grid ** 2)), 1.0)
    total = float(np.sum(resid ** 2))
    if total <= 1e-24 * scale:
        return 1.0
    coef = dctn(resid, norm="ortho")
    kx, ky = low_block(grid.shape)
    return float(np.sum(coef[:kx, :ky] ** 2) / np.sum(coef ** 2))


def white_phase_expectation(shape):
    """Metric expected for i.i.d. phases: ``tr(L Q) / tr(Q)``.

    ``Q`` projects out mean and ramp, ``L`` keeps the low DCT block.  The
    value sits a little below ``1/16`` for square grids because detrending
    removes energy that would otherwise land in the low block.
    """
    n = shape[0] * shape[1]
    A = _ramp_design(shape)
    Q = np.eye(n) - A @ np.linalg.pinv(A)
    kx, ky = low_block(shape)
    mask = np.zeros(shape)
    mask[:kx, :ky] = 1.0
    # L = D^T diag(mask) D with D the orthonormal 2-D DCT acting on flattened grids
    D = np.array([dctn(e.reshape(shape), norm="ortho").ravel() for e in np.eye(n)]).T
    L = D.T @ np.diag(mask.ravel()) @ D
    return float(np.trace(L @ Q) / np.trace(Q))


def white_phase_baseline(shape, trials=100, seed=0):
    """Mean metric over ``trials`` grids of i.i.d. uniform phases."""
    rng = np.random.default_rng(seed)
    return float(np.mean([smoothness_metric(rng.uniform(-np.pi, np.pi, shape)) for _ in range(trials)]))


def emit_phase_profile(profile, geom, path=None):
    """Unwrapped ``n_x x n_y`` phase grid of a profile and its smoothness metric.

    With ``path`` the grid is written as CSV, one row per x index.
    """
    gamma = np.asarray(getattr(profile, "gamma", profile))
    if gamma.size != geom.n:
        raise ValueError(f"profile length {gamma.size} does not match N={geom.n}")
    grid = unwrap_phase_grid(np.angle(gamma).reshape(geom.shape))
    metric = smoothness_metric(grid)
    if path is not None:
        write_grid_csv(path, grid)
    return grid, metric


def write_grid_csv(path, grid):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"y{j}" for j in range(grid.shape[1])) + "\n")
        for row in grid:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

