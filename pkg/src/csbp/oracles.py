"""Ground-truth and baseline decoders plus measurement-bound machinery.

``exact_mmse`` enumerates all 2^N state vectors (capped at N=16) and is the
reference the belief-propagation decoder is validated against.  ``iht_decode``
is the iterative hard-thresholding baseline, ``median_decode`` the
median-of-group-inner-products estimator behind the l-infinity recovery
guarantee, and ``validate_norm_bounds`` checks the tail-probability claims on
signal norms by Monte Carlo.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .encoder import SparseSignMatrix, encode, encode_transpose
from .errors import ParameterError, SizeError
from .rng import make_rng
from .signal_model import MixturePrior

EXACT_N_CAP = 16


def exact_mmse(
    phi: SparseSignMatrix, y: np.ndarray, prior: MixturePrior, sigma_z2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact posterior mean and state posterior by state enumeration.

    Every configuration q gets log-weight log Pr(q) + log N(y; 0, C_q) with
    C_q = Phi D_q Phi^T + sigma_z2 I, accumulated with log-sum-exp; the
    conditional mean given q is D_q Phi^T C_q^{-1} y.  Noiseless problems
    must be approximated with a small positive sigma_z2.
    """
    n, m = phi.n, phi.m
    if n > EXACT_N_CAP:
        raise SizeError(f"enumeration capped at n={EXACT_N_CAP}, got {n}")
    if sigma_z2 < 1e-6 * prior.sigma0**2:
        raise ParameterError(
            f"sigma_z2 must be >= 1e-6*sigma0^2 for a well-posed covariance, got {sigma_z2}"
        )
    y = np.asarray(y, dtype=float)
    dense = phi.to_dense()
    n_states = 1 << n
    bits = ((np.arange(n_states)[:, None] >> np.arange(n)) & 1).astype(float)
    d = prior.sigma0**2 + bits * (prior.sigma1**2 - prior.sigma0**2)
    log_pq = bits.sum(axis=1) * np.log(prior.s) + (n - bits.sum(axis=1)) * np.log(
        1.0 - prior.s
    )
    if m == 0:
        w = np.exp(log_pq - logsumexp(log_pq))
        return np.zeros(n), w @ bits
    cov = np.einsum("mi,bi,ki->bmk", dense, d, dense, optimize=True)
    cov[:, np.arange(m), np.arange(m)] += sigma_z2
    chol = np.linalg.cholesky(cov)
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    alpha = np.linalg.solve(cov, np.broadcast_to(y, (n_states, m))[..., None])[..., 0]
    log_like = -0.5 * (alpha @ y) - 0.5 * logdet - 0.5 * m * np.log(2.0 * np.pi)
    log_w = log_pq + log_like
    w = np.exp(log_w - logsumexp(log_w))
    x_per_state = d * (alpha @ dense)
    x_mmse = w @ x_per_state
    q_post = w @ bits
    return x_mmse, q_post


def spectral_norm_sq(phi: SparseSignMatrix, iters: int = 50) -> float:
    """||Phi||_2^2 estimated by power iteration on Phi^T Phi."""
    v = np.full(phi.n, 1.0 / np.sqrt(phi.n))
    for _ in range(iters):
        v = encode_transpose(phi, encode(phi, v))
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return 0.0
        v = v / norm
    return float(np.linalg.norm(encode(phi, v)) ** 2)


def iht_decode(
    phi: SparseSignMatrix,
    y: np.ndarray,
    k: int,
    iters: int = 200,
    with_info: bool = False,
):
    """Iterative hard thresholding: x <- H_k(x + kappa*Phi^T(y - Phi x)).

    The step size kappa is 1/||Phi||_2^2 from 50 power iterations.  Stops
    after ``iters`` rounds or once the residual norm stalls (relative change
    below 1e-8 for 5 consecutive iterations).  The output is exactly
    k-sparse.
    """
    if not 1 <= k <= phi.n:
        raise ParameterError(f"sparsity k must be in [1, n], got {k}")
    y = np.asarray(y, dtype=float)
    kappa = 1.0 / max(spectral_norm_sq(phi), 1e-30)
    x = np.zeros(phi.n)
    resid_prev = np.linalg.norm(y)
    stall = 0
    used = 0
    for used in range(1, iters + 1):
        r = y - encode(phi, x)
        x_full = x + kappa * encode_transpose(phi, r)
        keep = np.argsort(-np.abs(x_full), kind="stable")[:k]
        x = np.zeros(phi.n)
        x[keep] = x_full[keep]
        resid = np.linalg.norm(y - encode(phi, x))
        if abs(resid_prev - resid) <= 1e-8 * max(resid_prev, 1e-30):
            stall += 1
            if stall >= 5:
                break
        else:
            stall = 0
        resid_prev = resid
    if with_info:
        return x, {"iters": used, "kappa": kappa, "residual": float(resid_prev)}
    return x


def default_group_rows(m: int, n: int) -> int:
    """Default rows per group: about 4*ln(n) groups."""
    return max(8, m // max(1, math.ceil(4.0 * math.log(n))))


def median_decode(phi: SparseSignMatrix, y: np.ndarray, m1: int | None = None) -> np.ndarray:
    """Median over row groups of rescaled inner-product estimates.

    Entries are rescaled by sqrt(s) with s = n/l so the rescaled matrix has
    unit second moment; each group of m1 rows contributes the unbiased
    estimate (1/m1) * sum_j scaled_phi[j, i] * scaled_y[j], and the output
    takes the median across the floor(m/m1) groups.  Deterministic.
    """
    y = np.asarray(y, dtype=float)
    if m1 is None:
        m1 = default_group_rows(phi.m, phi.n)
    if not 1 <= m1 <= phi.m:
        raise ParameterError(f"group size must be in [1, m], got {m1}")
    n_groups = phi.m // m1
    s = phi.n / phi.l
    estimates = np.zeros((n_groups, phi.n))
    for g in range(n_groups):
        rows = slice(g * m1, (g + 1) * m1)
        contrib = (phi.signs[rows] * y[rows, None]).ravel()
        np.add.at(estimates[g], phi.cols[rows].ravel(), contrib)
    estimates *= s / m1
    return np.median(estimates, axis=0)


@dataclass(frozen=True)
class BoundParams:
    eta: float
    gamma: float
    mu: float
    s: float
    sigma0: float
    sigma1: float
    n: int

    def __post_init__(self):
        if min(self.eta, self.gamma, self.mu) <= 0.0:
            raise ParameterError("eta, gamma, mu must all be > 0")


class Theorem1Params(NamedTuple):
    l: float
    m_expr: float
    q_bound: float


def theorem1_params(bp: BoundParams) -> Theorem1Params:
    """Row weight, explicit measurement expression, and peak-to-energy bound.

    l = eta * ln(s * n^(1+gamma)) / s;
    m_expr = (1 + 2/eta) * (1+gamma) / mu^2 * [2K + (n-K)(sigma0/sigma1)^2] * ln(n)
    with K = s*n (the order-notation constant is not included);
    q_bound = sqrt(2 ln(s * n^(1+gamma)) / (s*n)).
    """
    core = bp.s * bp.n ** (1.0 + bp.gamma)
    if core <= 1.0:
        raise ParameterError(f"s * n^(1+gamma) must exceed 1, got {core}")
    log_core = math.log(core)
    l = bp.eta * log_core / bp.s
    k = bp.s * bp.n
    bracket = 2.0 * k + (bp.n - k) * (bp.sigma0 / bp.sigma1) ** 2
    m_expr = (1.0 + 2.0 / bp.eta) * (1.0 + bp.gamma) / bp.mu**2 * bracket * math.log(bp.n)
    q_bound = math.sqrt(2.0 * log_core / (bp.s * bp.n))
    return Theorem1Params(l=l, m_expr=m_expr, q_bound=q_bound)


def wilson_interval(count: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    p_hat = count / trials
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    count: int
    trials: int
    freq: float
    wilson_lo: float
    wilson_hi: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class BoundsReport:
    checks: tuple
    out_of_regime: bool
    regime_z: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self):
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            yield (
                f"{status} {c.name}: freq={c.freq:.5g} "
                f"wilson=[{c.wilson_lo:.5g}, {c.wilson_hi:.5g}] bound={c.bound:.5g}"
            )


def validate_norm_bounds(
    prior: MixturePrior, n: int, gamma: float, trials: int, seed: int
) -> BoundsReport:
    """Monte Carlo frequencies of the four norm-tail events.

    Events and their target bounds (a check passes when the Wilson 95% upper
    limit of its frequency is at or below the bound):

    * squared l2 norm below s*n*sigma1^2          -> n^-gamma
    * squared l2 norm above n*(2s*sigma1^2 + (1-s)*sigma0^2) -> n^-gamma
    * large-state count above 1.5*s*n             -> n^-gamma
    * peak magnitude at or above sqrt(2 ln(s*n^(1+gamma)))*sigma1 -> n^-gamma / 2

    The report also flags out-of-asymptotic-regime parameters: either the
    lower-tail threshold sits within 3 standard deviations of the mean
    squared norm (the tail statement cannot bind yet at this n), or the
    sparsity rate falls below (sigma0/sigma1)^2 so the variance separation
    premise behind the measurement bound is violated.
    """
    if trials < 1000:
        raise ParameterError(f"need at least 1000 trials, got {trials}")
    rng = make_rng(seed)
    s, s0, s1 = prior.s, prior.sigma0, prior.sigma1
    thr_lo = s * n * s1**2
    thr_hi = n * (2.0 * s * s1**2 + (1.0 - s) * s0**2)
    thr_count = 1.5 * s * n
    thr_inf = math.sqrt(2.0 * math.log(s * n ** (1.0 + gamma))) * s1
    counts = np.zeros(4, dtype=np.int64)
    done = 0
    while done < trials:
        chunk = min(2000, trials - done)
        q = rng.random((chunk, n)) < s
        x = rng.standard_normal((chunk, n)) * np.where(q, s1, s0)
        l2 = (x * x).sum(axis=1)
        counts[0] += int((l2 < thr_lo).sum())
        counts[1] += int((l2 > thr_hi).sum())
        counts[2] += int((q.sum(axis=1) > thr_count).sum())
        counts[3] += int((np.abs(x).max(axis=1) >= thr_inf).sum())
        done += chunk
    bounds = [n**-gamma, n**-gamma, n**-gamma, n**-gamma / 2.0]
    names = ["l2_lower_tail", "l2_upper_tail", "large_count", "linf_violation"]
    checks = []
    for name, count, bound in zip(names, counts, bounds):
        lo, hi = wilson_interval(int(count), trials)
        checks.append(
            BoundCheck(
                name=name,
                count=int(count),
                trials=trials,
                freq=count / trials,
                wilson_lo=lo,
                wilson_hi=hi,
                bound=bound,
                passed=hi <= bound,
            )
        )
    var_per = 3.0 * (s * s1**4 + (1 - s) * s0**4) - prior.second_moment**2
    regime_z = (n * prior.second_moment - thr_lo) / math.sqrt(n * var_per)
    weak_separation = s < (s0 / s1) ** 2
    return BoundsReport(
        checks=tuple(checks),
        out_of_regime=regime_z < 3.0 or weak_separation,
        regime_z=regime_z,
    )
