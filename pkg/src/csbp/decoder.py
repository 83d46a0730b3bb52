"""Damped belief-propagation decoder over the measurement factor graph.

Messages flow in a flooding schedule: all constraint-node updates, then all
variable-node updates, per iteration.  A constraint's outgoing message to a
neighbor is the density of (y - sum of the other neighbors' signed
coefficients) / sign, built from leave-one-out convolutions of the incoming
messages plus the measurement-noise kernel; a variable's outgoing message is
prior times the product of the other incoming messages.  Both update
families support message damping (convex combination with the previous
iteration), and either the sampled-grid codec or the Gaussian-mixture codec
carries the densities.

The grid engine is vectorized: per constraint, incoming messages are
reflected per their signs, transformed with zero-padded real FFTs, and
combined through cumulative prefix/suffix spectrum products, which yields
every leave-one-out convolution with two transforms per edge and no
spectral division.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.special import ndtr

from . import grid_pdf, mog
from .encoder import SparseSignMatrix, encode
from .errors import ParameterError, ShapeError
from .grid_pdf import Grid, default_grid
from .signal_model import MixturePrior

VALUE_FLOOR_RATIO = 1e-12
CLIP_WARN_FRACTION = 0.10


@dataclass(frozen=True)
class FactorGraph:
    """Edge-list view of a SparseSignMatrix, constraint-major ordering."""

    n_var: int
    n_con: int
    degree: int
    e_var: np.ndarray
    e_sign: np.ndarray
    var_order: np.ndarray
    var_indptr: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.e_var.size


def build_graph(phi: SparseSignMatrix) -> FactorGraph:
    """Flatten the matrix adjacency into edge arrays (row-major order)."""
    e_var = phi.cols.ravel().astype(np.int64)
    e_sign = phi.signs.ravel().astype(np.int64)
    deg = np.bincount(e_var, minlength=phi.n)
    var_order = np.argsort(e_var, kind="stable")
    var_indptr = np.concatenate([[0], np.cumsum(deg)])
    return FactorGraph(
        n_var=phi.n,
        n_con=phi.m,
        degree=phi.l,
        e_var=e_var,
        e_sign=e_sign,
        var_order=var_order,
        var_indptr=var_indptr,
    )


@dataclass(frozen=True)
class DecoderConfig:
    codec: str = "grid"
    grid: Grid | None = None
    m_comps: int = 6
    beta: float = 0.5
    max_iters: int | None = None
    tol: float = 1e-4
    sigma_z2: float = 0.0
    seed: int = 0
    damp_constraint: bool = True
    damp_variable: bool = True

    def __post_init__(self):
        if self.codec not in ("grid", "mog"):
            raise ParameterError(f"codec must be 'grid' or 'mog', got {self.codec!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ParameterError(f"damping weight must be in (0, 1], got {self.beta}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0.0:
            raise ParameterError(f"tol must be >= 0, got {self.tol}")
        if self.sigma_z2 < 0.0:
            raise ParameterError(f"noise variance must be >= 0, got {self.sigma_z2}")
        if self.m_comps < 1:
            raise ParameterError(f"m_comps must be >= 1, got {self.m_comps}")

    def resolved_iters(self, n: int) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return max(1, int(np.ceil(2.0 * np.log2(max(n, 2)))))


@dataclass
class DecodeResult:
    x_mmse: np.ndarray
    x_map: np.ndarray
    q_posterior: np.ndarray
    iters_run: int
    converged: bool
    residual_l2: float
    telemetry: dict = field(default_factory=dict)


def decode(phi: SparseSignMatrix, y: np.ndarray, prior: MixturePrior, cfg: DecoderConfig) -> DecodeResult:
    """Belief-propagation decode of one instance: marginals and estimates."""
    y = np.asarray(y, dtype=float)
    if y.shape != (phi.m,):
        raise ShapeError(f"measurement length {y.shape} does not match m={phi.m}")
    if y.size and not np.all(np.isfinite(y)):
        raise ParameterError("measurements must be finite")
    t0 = time.perf_counter()
    if phi.m == 0:
        return _empty_result(phi.n, prior, t0)
    if cfg.codec == "grid":
        engine = _GridEngine(phi, y, prior, cfg)
    else:
        engine = _MogEngine(phi, y, prior, cfg)
    return engine.run(t0)


def progressive_decode(
    phi: SparseSignMatrix,
    y: np.ndarray,
    prior: MixturePrior,
    cfg: DecoderConfig,
    prefix_lengths,
) -> list[DecodeResult]:
    """Decode with the first m' measurement rows for each prefix length."""
    prefixes = list(prefix_lengths)
    if any(b < a for a, b in zip(prefixes, prefixes[1:])):
        raise ParameterError("prefix lengths must be ascending")
    if prefixes and prefixes[-1] > phi.m:
        raise ParameterError(f"prefix {prefixes[-1]} exceeds m={phi.m}")
    results = []
    y = np.asarray(y, dtype=float)
    for m_prime in prefixes:
        if m_prime == 0:
            results.append(decode(_empty_like(phi), y[:0], prior, cfg))
        else:
            results.append(decode(phi.row_prefix(m_prime), y[:m_prime], prior, cfg))
    return results


def _empty_like(phi: SparseSignMatrix) -> SparseSignMatrix:
    return SparseSignMatrix(
        0, phi.n, phi.l, np.zeros((0, phi.l), np.int64), np.zeros((0, phi.l), np.int8), phi.seed
    )


def _empty_result(n: int, prior: MixturePrior, t0: float) -> DecodeResult:
    return DecodeResult(
        x_mmse=np.zeros(n),
        x_map=np.zeros(n),
        q_posterior=np.full(n, prior.s),
        iters_run=0,
        converged=True,
        residual_l2=0.0,
        telemetry={
            "max_change": [],
            "clipped_mass_max": 0.0,
            "clip_warnings": 0,
            "degenerate_count": 0,
            "beta_final": None,
            "guard_triggered": False,
            "wall_time_s": time.perf_counter() - t0,
            "work_units": 1e-9,
        },
    )


class _DivergenceGuard:
    """Halve the damping weight once after 3 consecutive growth steps."""

    def __init__(self, beta: float):
        self.beta = beta
        self.triggered = False
        self._growth = 0
        self._last = None

    def update(self, change: float):
        if self._last is not None and change > self._last:
            self._growth += 1
        else:
            self._growth = 0
        self._last = change
        if self._growth >= 3 and not self.triggered:
            self.beta = self.beta / 2.0
            self.triggered = True


class _GridEngine:
    CHUNK_EDGES = 4096

    def __init__(self, phi, y, prior, cfg):
        self.phi, self.y, self.prior, self.cfg = phi, y, prior, cfg
        grid = cfg.grid if cfg.grid is not None else default_grid(prior)
        if grid.delta >= prior.sigma0:
            raise ParameterError(
                f"grid spacing {grid.delta} must be below sigma0={prior.sigma0}"
            )
        self.grid = grid
        self.graph = build_graph(phi)
        self.t = grid.points()
        self.p, self.delta, self.c = grid.p, grid.delta, grid.center_index
        self.dtype = np.float32
        self.npad = self._padded_length()
        self.prior_values = grid_pdf.from_prior(grid, prior).values
        # The measurement offset y(c) splits into whole grid bins plus a
        # fractional remainder; the remainder becomes the mean of the
        # bin-integrated noise kernel, so the fractional shift is exact and
        # only an integer-bin gather remains.
        kernel_var = cfg.sigma_z2 if cfg.sigma_z2 > 0.0 else (grid.delta / 2.0) ** 2
        self.y_bins = np.floor(self.y / self.delta).astype(np.int64)
        kernel_means = self.y_bins * self.delta - self.y
        kernel_mass = _bin_integrated_gaussian(self.t, self.delta, kernel_means, kernel_var)
        self.kernel_spec = sfft.rfft(self._wrap(kernel_mass.astype(self.dtype)), n=self.npad, axis=-1)
        self.prior_msg = (self.prior_values * self.delta).astype(self.dtype)
        self.k0 = grid_pdf.from_gaussian(grid, 0.0, prior.sigma0**2).values
        self.k1 = grid_pdf.from_gaussian(grid, 0.0, prior.sigma1**2).values

    def _padded_length(self) -> int:
        """FFT length: the sum density's tails must stay clear of the circular
        wrap so one padded transform realizes the truncated linear
        convolution; reads never leave the +-half_width window."""
        tail_bins = int(
            np.ceil(
                8.0
                * np.sqrt(self.phi.l * self.prior.second_moment + self.cfg.sigma_z2)
                / self.delta
            )
        )
        return sfft.next_fast_len(self.p + tail_bins + 8, real=True)

    # --- circular layout: t=0 lives at padded index 0; sign -1 edges are
    # reflected about the center while wrapping ---

    def _wrap(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(v.shape[:-1] + (self.npad,), dtype=v.dtype)
        out[..., : self.c + 1] = v[..., self.c :]
        out[..., self.npad - self.c :] = v[..., : self.c]
        return out

    def _fill_wrapped_signed(self, buf, msgs, positive):
        c, npad = self.c, self.npad
        neg = ~positive
        buf[positive, : c + 1] = msgs[positive, c:]
        buf[positive, npad - c :] = msgs[positive, :c]
        buf[neg, : c + 1] = msgs[neg, c::-1]
        buf[neg, npad - c :] = msgs[neg, :c:-1]

    def _gather_indices(self) -> np.ndarray:
        """Per-edge source bins for reading h(y - sign*t); the sentinel npad
        points at an always-zero column so off-window reads clip to zero."""
        g = self.graph
        sg = g.e_sign[:, None]
        offs = self.y_bins.repeat(g.degree)[:, None] - sg * (
            np.arange(self.p, dtype=np.int64) - self.c
        )
        idx = np.where(np.abs(offs) <= self.c, offs % self.npad, self.npad)
        return idx.astype(np.int32)

    def _normalize_rows(self, v: np.ndarray, fallback: np.ndarray):
        """Normalize mass rows to sum 1 in place; degenerate rows fall back."""
        np.maximum(v, 0.0, out=v)
        sums = v.sum(axis=-1)
        bad = ~np.isfinite(sums) | (sums <= 0.0)
        n_bad = int(bad.sum())
        if n_bad:
            v[bad] = fallback
            sums[bad] = fallback.sum()
        v /= sums[..., None]
        return v, n_bad

    def _apply_update(self, store, sl, fresh, beta, damp, first):
        """Damped in-place message update; returns the max L1 change."""
        view = store[sl]
        if first:
            store[sl] = fresh
            return float("inf")
        if not damp or beta >= 1.0:
            change = float(np.abs(fresh - view).sum(axis=-1).max(initial=0.0))
            store[sl] = fresh
            return change
        fresh -= view
        change = beta * float(np.abs(fresh).sum(axis=-1).max(initial=0.0))
        view += self.dtype(beta) * fresh
        return change

    def _constraint_phase(self, v2c, c2v, beta, damp, first):
        g = self.graph
        l, p, npad = g.degree, self.p, self.npad
        n_con = g.n_con
        nf = self.kernel_spec.shape[-1]
        max_clip = 0.0
        clip_warn = 0
        degen = 0
        change = 0.0
        con_chunk = max(1, self.CHUNK_EDGES // l)
        positive = g.e_sign > 0
        wrap_buf = np.zeros((con_chunk * l, npad), dtype=self.dtype)
        for j0 in range(0, n_con, con_chunk):
            j1 = min(j0 + con_chunk, n_con)
            b = j1 - j0
            sl = slice(j0 * l, j1 * l)
            buf = wrap_buf[: b * l]
            self._fill_wrapped_signed(buf, v2c[sl], positive[sl])
            spec = sfft.rfft(buf, n=npad, axis=-1).reshape(b, l, nf)
            # leave-one-out spectrum products, kernel folded into the prefix
            loo = np.empty_like(spec)
            acc = np.array(self.kernel_spec[j0:j1])
            for k in range(l - 1):
                loo[:, k] = acc
                acc *= spec[:, k]
            loo[:, l - 1] = acc
            run = spec[:, l - 1].copy()
            for k in range(l - 2, -1, -1):
                loo[:, k] *= run
                run *= spec[:, k]
            w = sfft.irfft(loo.reshape(b * l, nf), n=npad, axis=-1)
            np.maximum(w, 0.0, out=w)
            w = np.concatenate([w, np.zeros((b * l, 1), dtype=self.dtype)], axis=1)
            out = np.take_along_axis(w, self.gather_idx[sl], axis=-1)
            clip = 1.0 - out.sum(axis=-1)
            max_clip = max(max_clip, float(clip.max(initial=0.0)))
            clip_warn += int((clip > CLIP_WARN_FRACTION).sum())
            out, n_bad = self._normalize_rows(out, self.prior_msg)
            degen += n_bad
            change = max(change, self._apply_update(c2v, sl, out, beta, damp, first))
        return change, max_clip, clip_warn, degen

    def _variable_products(self, c2v):
        """Clamped incoming messages and per-variable products (with prior).

        Products of many sub-unit masses underflow single precision, so the
        reduction runs in double and the result is rescaled per row before
        converting back."""
        g = self.graph
        floor = c2v.max(axis=1, keepdims=True) * self.dtype(VALUE_FLOOR_RATIO)
        clamped = np.maximum(c2v, floor)
        gathered = clamped[g.var_order].astype(np.float64)
        if self.regular_r:
            products = gathered.reshape(g.n_var, self.regular_r, self.p).prod(axis=1)
        else:
            deg = np.diff(g.var_indptr)
            nonempty = deg > 0
            starts = g.var_indptr[:-1][nonempty]
            products = np.ones((g.n_var, self.p))
            if starts.size:
                products[nonempty] = np.multiply.reduceat(gathered, starts, axis=0)
        products *= self.prior_msg
        return clamped, products

    def _variable_phase(self, c2v, v2c, beta, damp, first):
        g = self.graph
        clamped, full = self._variable_products(c2v)
        scale = full.max(axis=1, keepdims=True)
        scaled = np.divide(full, scale, where=scale > 0, out=np.zeros_like(full))
        out = scaled.astype(self.dtype)[g.e_var]
        out /= clamped
        out, degen = self._normalize_rows(out, self.prior_msg)
        change = self._apply_update(v2c, slice(None), out, beta, damp, first)
        return change, full, degen

    def run(self, t0: float) -> DecodeResult:
        g, cfg = self.graph, self.cfg
        max_iters = cfg.resolved_iters(g.n_var)
        deg = np.diff(g.var_indptr)
        self.regular_r = int(deg[0]) if deg.size and deg.min() == deg.max() > 0 else 0
        self.gather_idx = self._gather_indices()
        v2c = np.tile(self.prior_msg, (g.n_edges, 1))
        c2v = np.empty_like(v2c)
        guard = _DivergenceGuard(cfg.beta)
        changes = []
        clip_max = 0.0
        clip_warn = 0
        degen_total = 0
        converged = False
        iters = 0
        full = None
        for iters in range(1, max_iters + 1):
            first = iters == 1
            change_c, clip, warn, dg1 = self._constraint_phase(
                v2c, c2v, guard.beta, cfg.damp_constraint, first
            )
            change_v, full, dg2 = self._variable_phase(
                c2v, v2c, guard.beta, cfg.damp_variable, False
            )
            clip_max = max(clip_max, clip)
            clip_warn += warn
            degen_total += dg1 + dg2
            change = max(change_c, change_v)
            changes.append(change)
            if change <= cfg.tol:
                converged = True
                break
            guard.update(change)
        x_mmse, x_map, q_post = self._extract(c2v, full)
        residual = float(np.linalg.norm(self.y - encode(self.phi, x_mmse)))
        work = 2.0 * g.n_edges * self.npad * np.log2(self.npad) * iters / 1e9
        return DecodeResult(
            x_mmse=x_mmse,
            x_map=x_map,
            q_posterior=q_post,
            iters_run=iters,
            converged=converged,
            residual_l2=residual,
            telemetry={
                "max_change": changes,
                "clipped_mass_max": clip_max,
                "clip_warnings": clip_warn,
                "degenerate_count": degen_total,
                "beta_final": guard.beta,
                "guard_triggered": guard.triggered,
                "wall_time_s": time.perf_counter() - t0,
                "work_units": float(max(work, 1e-9)),
            },
        )

    def _extract(self, c2v, full):
        g = self.graph
        marg, _ = self._normalize_rows(full.astype(np.float64), self.prior_values)
        x_mmse = marg @ self.t
        # argmax with ties broken toward smallest |t|, negative first
        order = np.lexsort((self.t, np.abs(self.t)))
        x_map = self.t[order][np.argmax(marg[:, order], axis=1)]
        # state posterior by quadrature of the incoming-message product
        floor = c2v.max(axis=1, keepdims=True) * VALUE_FLOOR_RATIO
        gathered = np.maximum(c2v, floor)[g.var_order].astype(np.float64)
        deg = np.diff(g.var_indptr)
        nonempty = deg > 0
        starts = g.var_indptr[:-1][nonempty]
        evidence = np.ones((g.n_var, self.p))
        if starts.size:
            evidence[nonempty] = np.multiply.reduceat(gathered, starts, axis=0)
        scale = evidence.max(axis=1, keepdims=True)
        evidence = evidence / np.where(scale > 0, scale, 1.0)
        s = self.prior.s
        big = s * (evidence @ self.k1) * self.delta
        small = (1.0 - s) * (evidence @ self.k0) * self.delta
        total = big + small
        q_post = np.where(total > 0, big / np.where(total > 0, total, 1.0), s)
        return x_mmse, x_map, np.clip(q_post, 0.0, 1.0)


def _bin_integrated_gaussian(t: np.ndarray, delta: float, means: np.ndarray, var: float) -> np.ndarray:
    """Per-bin probability mass of Normal(mean, var), one row per mean."""
    sd = np.sqrt(var)
    means = np.atleast_1d(means)
    hi = ndtr((t[None, :] + delta / 2.0 - means[:, None]) / sd)
    lo = ndtr((t[None, :] - delta / 2.0 - means[:, None]) / sd)
    mass = hi - lo
    return mass / mass.sum(axis=1, keepdims=True)


class _MogEngine:
    """Mixture-codec engine; clear over fast, intended for small instances."""

    def __init__(self, phi, y, prior, cfg):
        self.phi, self.y, self.prior, self.cfg = phi, y, prior, cfg
        self.graph = build_graph(phi)
        self.m_comps = cfg.m_comps
        self.prior_mix = mog.from_prior(prior)
        span = 6.0 * prior.sigma1
        self.probe = np.linspace(-span, span, 257)
        self.con_edges = [
            range(j * phi.l, (j + 1) * phi.l) for j in range(phi.m)
        ]
        self.var_edges = [[] for _ in range(phi.n)]
        for e, v in enumerate(self.graph.e_var):
            self.var_edges[v].append(e)

    def _probe_l1(self, a, b):
        if b is None:
            return float("inf")
        step = self.probe[1] - self.probe[0]
        return float(np.abs(mog.density(a, self.probe) - mog.density(b, self.probe)).sum() * step)

    def _reduce(self, mix):
        return mog.reduce_ipra(mix, self.m_comps)

    def _constraint_out(self, incoming_signed, y_j, sign_v, skip):
        """Leave-one-out convolution, noise, then map through y - sign*x."""
        acc = None
        for k, g in enumerate(incoming_signed):
            if k == skip:
                continue
            acc = g if acc is None else self._reduce(mog.mix_convolve(acc, g))
        if self.cfg.sigma_z2 > 0.0:
            noise = mog.single(0.0, self.cfg.sigma_z2)
            acc = noise if acc is None else mog.mix_convolve(acc, noise)
        if acc is None:
            # degree-1 constraint, noiseless: a narrow stand-in for the spike
            acc = mog.single(0.0, (self.prior.sigma0 / 100.0) ** 2)
        return self._reduce(mog.mix_affine(acc, -sign_v, sign_v * y_j))

    def run(self, t0):
        g, cfg = self.graph, self.cfg
        max_iters = cfg.resolved_iters(g.n_var)
        v2c = [self.prior_mix] * g.n_edges
        c2v = [None] * g.n_edges
        guard = _DivergenceGuard(cfg.beta)
        changes = []
        degen = 0
        converged = False
        iters = 0
        for iters in range(1, max_iters + 1):
            change = 0.0
            new_c2v = list(c2v)
            for j in range(g.n_con):
                edges = list(self.con_edges[j])
                signed = [
                    mog.mix_affine(v2c[e], int(g.e_sign[e])) for e in edges
                ]
                for k, e in enumerate(edges):
                    try:
                        out = self._constraint_out(signed, self.y[j], int(g.e_sign[e]), k)
                    except mog.DegenerateMessageError:
                        out = self.prior_mix
                        degen += 1
                    if cfg.damp_constraint and c2v[e] is not None:
                        out = mog.blend(out, c2v[e], guard.beta, self.m_comps)
                    change = max(change, self._probe_l1(out, c2v[e]))
                    new_c2v[e] = out
            c2v = new_c2v
            new_v2c = list(v2c)
            for v in range(g.n_var):
                edges = self.var_edges[v]
                for e in edges:
                    acc = self.prior_mix
                    try:
                        for other in edges:
                            if other != e:
                                acc = self._reduce(mog.mix_multiply(acc, c2v[other]))
                    except mog.DegenerateMessageError:
                        acc = self.prior_mix
                        degen += 1
                    if cfg.damp_variable:
                        acc = mog.blend(acc, v2c[e], guard.beta, self.m_comps)
                    change = max(change, self._probe_l1(acc, v2c[e]))
                    new_v2c[e] = acc
            v2c = new_v2c
            changes.append(change)
            if change <= cfg.tol:
                converged = True
                break
            guard.update(change)
        x_mmse, x_map, q_post = self._extract(c2v)
        residual = float(np.linalg.norm(self.y - encode(self.phi, x_mmse)))
        work = g.n_edges * self.m_comps**2 * g.degree * iters / 1e9
        return DecodeResult(
            x_mmse=x_mmse,
            x_map=x_map,
            q_posterior=q_post,
            iters_run=iters,
            converged=converged,
            residual_l2=residual,
            telemetry={
                "max_change": changes,
                "clipped_mass_max": 0.0,
                "clip_warnings": 0,
                "degenerate_count": degen,
                "beta_final": guard.beta,
                "guard_triggered": guard.triggered,
                "wall_time_s": time.perf_counter() - t0,
                "work_units": float(max(work, 1e-9)),
            },
        )

    def _extract(self, c2v):
        n = self.graph.n_var
        x_mmse = np.zeros(n)
        x_map = np.zeros(n)
        q_post = np.full(n, self.prior.s)
        s0, s1, s = self.prior.sigma0, self.prior.sigma1, self.prior.s
        for v in range(n):
            edges = self.var_edges[v]
            marginal = self.prior_mix
            evidence = None
            for e in edges:
                marginal = self._reduce(mog.mix_multiply(marginal, c2v[e]))
                evidence = (
                    c2v[e]
                    if evidence is None
                    else self._reduce(mog.mix_multiply(evidence, c2v[e]))
                )
            mean, _, argmax = mog.mix_moments(marginal, argmax_spacing=s0 / 4.0)
            x_mmse[v] = mean
            x_map[v] = argmax
            if evidence is not None:
                big = s * _gauss_inner(evidence, s1**2)
                small = (1.0 - s) * _gauss_inner(evidence, s0**2)
                q_post[v] = big / (big + small)
        return x_mmse, x_map, np.clip(q_post, 0.0, 1.0)


def _gauss_inner(mix: mog.GaussMixture, var0: float) -> float:
    """Integral of N(t; 0, var0) against the mixture density."""
    return float(
        np.dot(
            mix.w,
            np.exp(-0.5 * mix.mu**2 / (var0 + mix.var))
            / np.sqrt(2.0 * np.pi * (var0 + mix.var)),
        )
    )
