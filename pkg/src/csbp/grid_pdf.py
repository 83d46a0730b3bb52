"""Sampled-density message codec on a fixed symmetric grid.

A density is represented by ``p`` (odd) uniform samples with spacing
``delta`` centered on 0.  Products are pointwise, convolutions run through
zero-padded FFTs (linear, never circular), and any mass pushed off the grid
by a convolution or shift is tracked in ``clipped_mass``.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import next_fast_len

from .errors import DegenerateMessageError, ParameterError, RangeError
from .signal_model import MixturePrior

NORM_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Odd sample count and spacing; the grid spans +-(p-1)/2 * delta."""

    p: int
    delta: float

    def __post_init__(self):
        if self.p < 3 or self.p % 2 == 0:
            raise ParameterError(f"sample count must be odd and >= 3, got {self.p}")
        if self.delta <= 0.0:
            raise ParameterError(f"spacing must be > 0, got {self.delta}")

    @property
    def half_width(self) -> float:
        return (self.p - 1) / 2 * self.delta

    @property
    def center_index(self) -> int:
        return (self.p - 1) // 2

    def points(self) -> np.ndarray:
        return (np.arange(self.p) - self.center_index) * self.delta


def _odd_smooth_at_least(n: int) -> int:
    """Smallest odd integer >= n whose prime factors are all in {3, 5, 7}."""
    best = None
    a = 1
    while a < 8 * max(n, 1):
        b = a
        while b < 8 * max(n, 1):
            c = b
            while c < 8 * max(n, 1):
                if c >= n and (best is None or c < best):
                    best = c
                c *= 7
            b *= 5
        a *= 3
    return best


def default_grid(prior: MixturePrior, delta: float | None = None) -> Grid:
    """Grid with spacing sigma0/2 (configurable) covering +-6*sigma1."""
    d = prior.sigma0 / 2 if delta is None else delta
    if d >= prior.sigma0:
        raise ParameterError("grid spacing must be below sigma0")
    need = int(np.ceil(2 * 6.0 * prior.sigma1 / d))
    return Grid(p=_odd_smooth_at_least(need), delta=d)


def paper_grid(prior: MixturePrior) -> Grid:
    """The 525-sample preset (3 * 5^2 * 7) at spacing sigma0/2."""
    return Grid(p=525, delta=prior.sigma0 / 2)


@dataclass(frozen=True)
class GridPdf:
    """Nonnegative samples normalized so sum(values) * delta = 1."""

    grid: Grid
    values: np.ndarray
    clipped_mass: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.values.shape != (self.grid.p,):
            raise ParameterError("values length must equal grid.p")


def _normalized(grid: Grid, raw: np.ndarray, clipped: float = 0.0) -> GridPdf:
    raw = np.maximum(raw, 0.0)
    total = raw.sum() * grid.delta
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateMessageError("density collapsed to zero mass")
    return GridPdf(grid=grid, values=raw / total, clipped_mass=float(clipped))


def from_values(grid: Grid, raw: np.ndarray) -> GridPdf:
    """Normalize arbitrary nonnegative samples into a GridPdf."""
    return _normalized(grid, np.asarray(raw, dtype=float))


def from_gaussian(grid: Grid, mean: float, var: float) -> GridPdf:
    """Truncated-Gaussian samples, renormalized on the grid."""
    if var <= 0.0:
        raise ParameterError(f"variance must be > 0, got {var}")
    if abs(mean) > grid.half_width:
        raise RangeError(f"mean {mean} outside grid range +-{grid.half_width}")
    t = grid.points()
    return _normalized(grid, np.exp(-((t - mean) ** 2) / (2.0 * var)))


def from_prior(grid: Grid, prior: MixturePrior) -> GridPdf:
    """s-weighted sum of the small and large state Gaussians."""
    small = from_gaussian(grid, 0.0, prior.sigma0**2)
    large = from_gaussian(grid, 0.0, prior.sigma1**2)
    return _normalized(grid, (1.0 - prior.s) * small.values + prior.s * large.values)


def uniform(grid: Grid) -> GridPdf:
    return GridPdf(grid=grid, values=np.full(grid.p, 1.0 / (grid.p * grid.delta)))


def spike(grid: Grid, t: float = 0.0) -> GridPdf:
    """Single-bin density at the grid point nearest t (tests and identities)."""
    k = int(round(t / grid.delta)) + grid.center_index
    if not 0 <= k < grid.p:
        raise RangeError(f"spike location {t} outside grid")
    v = np.zeros(grid.p)
    v[k] = 1.0 / grid.delta
    return GridPdf(grid=grid, values=v)


def _require_same_grid(a: GridPdf, b: GridPdf):
    if a.grid != b.grid:
        raise ParameterError("operands must share one grid")


def multiply(a: GridPdf, b: GridPdf) -> GridPdf:
    """Pointwise product, renormalized."""
    _require_same_grid(a, b)
    return _normalized(a.grid, a.values * b.values)


def convolve(a: GridPdf, b: GridPdf) -> GridPdf:
    """Linear convolution via zero-padded FFT, truncated back to the grid."""
    _require_same_grid(a, b)
    g = a.grid
    from scipy import fft as sfft

    npad = next_fast_len(2 * g.p - 1, real=True)
    spec = sfft.rfft(a.values, npad) * sfft.rfft(b.values, npad)
    full = sfft.irfft(spec, npad)[: 2 * g.p - 1] * g.delta
    full = np.maximum(full, 0.0)
    c = g.center_index
    window = full[c : c + g.p]
    clipped = max(0.0, 1.0 - window.sum() * g.delta)
    return _normalized(g, window, clipped)


def convolve_direct(a: GridPdf, b: GridPdf) -> GridPdf:
    """O(p^2) reference convolution used to validate the FFT path."""
    _require_same_grid(a, b)
    g = a.grid
    full = np.convolve(a.values, b.values) * g.delta
    c = g.center_index
    window = full[c : c + g.p]
    clipped = max(0.0, 1.0 - window.sum() * g.delta)
    return _normalized(g, window, clipped)


def reflect(a: GridPdf) -> GridPdf:
    """Mirror about the center bin; an involution on the symmetric grid."""
    return GridPdf(grid=a.grid, values=a.values[::-1].copy(), clipped_mass=a.clipped_mass)


def shift(a: GridPdf, t: float) -> GridPdf:
    """Translate by t with linear interpolation; off-grid mass is clipped."""
    if t == 0.0:
        return a
    g = a.grid
    pts = g.points()
    moved = np.interp(pts - t, pts, a.values, left=0.0, right=0.0)
    clipped = max(0.0, 1.0 - moved.sum() * g.delta)
    return _normalized(g, moved, clipped)


def moments(a: GridPdf) -> tuple[float, float, float]:
    """(mean, variance, argmax); argmax ties go to smallest |t|, negative first."""
    g = a.grid
    t = g.points()
    w = a.values * g.delta
    mean = float(np.dot(t, w))
    var = float(np.dot((t - mean) ** 2, w))
    peak = a.values.max()
    ties = np.flatnonzero(a.values == peak)
    tie_ts = t[ties]
    order = np.lexsort((tie_ts, np.abs(tie_ts)))
    return mean, var, float(tie_ts[order[0]])


def l1_distance(a: GridPdf, b: GridPdf) -> float:
    _require_same_grid(a, b)
    return float(np.abs(a.values - b.values).sum() * a.grid.delta)


def clamped(a: GridPdf, floor_ratio: float = 1e-12) -> GridPdf:
    """Raise values below floor_ratio * max to the floor (pre-division guard)."""
    floor = a.values.max() * floor_ratio
    return replace(a, values=np.maximum(a.values, floor))
