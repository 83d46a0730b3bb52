"""Gaussian-mixture message codec with pairwise-merge model reduction.

Products and convolutions of mixtures are exact but multiplicative in
component count, so messages are repeatedly reduced to at most ``m``
components by greedily merging the pair with the smallest Hellinger
distance; each merge matches moments, so total weight, mean, and second
moment are conserved exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMessageError, ParameterError

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class GaussMixture:
    """Component weights (summing to 1), means, and variances."""

    w: np.ndarray
    mu: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        w, mu, var = (np.asarray(a, dtype=float) for a in (self.w, self.mu, self.var))
        if not (w.shape == mu.shape == var.shape) or w.ndim != 1 or w.size < 1:
            raise ParameterError("w, mu, var must be equal-length 1-D arrays")
        if np.any(w <= 0.0) or np.any(var <= 0.0):
            raise ParameterError("weights and variances must be > 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights must sum to 1, got {w.sum()}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "var", var)

    def __len__(self) -> int:
        return self.w.size


def mixture(pairs) -> GaussMixture:
    """Build a mixture from (weight, mean, variance) triples, normalizing w."""
    w, mu, var = (np.array(col, dtype=float) for col in zip(*pairs))
    return GaussMixture(w=w / w.sum(), mu=mu, var=var)


def single(mean: float, var: float) -> GaussMixture:
    return GaussMixture(w=np.array([1.0]), mu=np.array([mean]), var=np.array([var]))


def from_prior(prior) -> GaussMixture:
    return GaussMixture(
        w=np.array([1.0 - prior.s, prior.s]),
        mu=np.zeros(2),
        var=np.array([prior.sigma0**2, prior.sigma1**2]),
    )


def density(a: GaussMixture, t: np.ndarray) -> np.ndarray:
    """Mixture density evaluated at the points t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    z = (t[:, None] - a.mu[None, :]) ** 2 / a.var[None, :]
    comp = np.exp(-0.5 * z) / (_SQRT_2PI * np.sqrt(a.var))[None, :]
    return comp @ a.w


def mix_multiply(a: GaussMixture, b: GaussMixture) -> GaussMixture:
    """Exact product of two mixtures; |a|*|b| components, not reduced."""
    v1, v2 = a.var[:, None], b.var[None, :]
    m1, m2 = a.mu[:, None], b.mu[None, :]
    v = 1.0 / (1.0 / v1 + 1.0 / v2)
    mu = v * (m1 / v1 + m2 / v2)
    overlap = np.exp(-0.5 * (m1 - m2) ** 2 / (v1 + v2)) / (_SQRT_2PI * np.sqrt(v1 + v2))
    w = a.w[:, None] * b.w[None, :] * overlap
    total = w.sum()
    if total < 1e-300:
        raise DegenerateMessageError("product mixture weight underflowed")
    return GaussMixture(w=(w / total).ravel(), mu=mu.ravel(), var=v.ravel())


def mix_convolve(a: GaussMixture, b: GaussMixture) -> GaussMixture:
    """Exact convolution: means add, variances add, weights multiply."""
    w = (a.w[:, None] * b.w[None, :]).ravel()
    mu = (a.mu[:, None] + b.mu[None, :]).ravel()
    var = (a.var[:, None] + b.var[None, :]).ravel()
    return GaussMixture(w=w / w.sum(), mu=mu, var=var)


def mix_affine(a: GaussMixture, sign: int, offset: float = 0.0) -> GaussMixture:
    """Map X -> sign*X + offset; variances are unchanged."""
    if sign not in (-1, 1):
        raise ParameterError(f"sign must be +-1, got {sign}")
    return GaussMixture(w=a.w.copy(), mu=sign * a.mu + offset, var=a.var.copy())


def _hellinger_sq(mu1, v1, mu2, v2):
    bc = np.sqrt(np.sqrt(v1 * v2) * 2.0 / (v1 + v2)) * np.exp(
        -0.25 * (mu1 - mu2) ** 2 / (v1 + v2)
    )
    return 1.0 - bc


def merge_pair(w1, mu1, v1, w2, mu2, v2):
    """Moment-matching merge of two weighted components."""
    w = w1 + w2
    mu = (w1 * mu1 + w2 * mu2) / w
    var = (w1 * (v1 + mu1**2) + w2 * (v2 + mu2**2)) / w - mu**2
    return w, mu, var


def reduce_ipra(a: GaussMixture, m: int) -> GaussMixture:
    """Greedy pairwise reduction to at most m components.

    Repeatedly merges the pair with minimal Hellinger distance between the
    (weight-normalized) members.  Ties break on the lowest component index
    pair for determinism.
    """
    if m < 1:
        raise ParameterError(f"target component count must be >= 1, got {m}")
    if len(a) <= m:
        return a
    w, mu, var = list(a.w), list(a.mu), list(a.var)
    while len(w) > m:
        n = len(w)
        best, best_d = None, np.inf
        for i in range(n):
            for j in range(i + 1, n):
                d = _hellinger_sq(mu[i], var[i], mu[j], var[j])
                if d < best_d:
                    best, best_d = (i, j), d
        i, j = best
        w_m, mu_m, var_m = merge_pair(w[i], mu[i], var[i], w[j], mu[j], var[j])
        for seq, val in ((w, w_m), (mu, mu_m), (var, var_m)):
            seq[i] = val
            del seq[j]
    out = GaussMixture(w=np.array(w), mu=np.array(mu), var=np.array(var))
    return out


def mix_moments(a: GaussMixture, argmax_spacing: float | None = None) -> tuple[float, float, float]:
    """(mean, variance, argmax); argmax via dense evaluation.

    The evaluation grid spans the component means +-6 std-devs with spacing
    a quarter of the narrowest component std-dev unless given explicitly.
    """
    mean = float(np.dot(a.w, a.mu))
    var = float(np.dot(a.w, a.var + a.mu**2) - mean**2)
    spread = float(np.sqrt(a.var.max()))
    lo = float(a.mu.min()) - 6.0 * spread
    hi = float(a.mu.max()) + 6.0 * spread
    d = argmax_spacing if argmax_spacing is not None else float(np.sqrt(a.var.min())) / 4.0
    t = np.arange(lo, hi + d, d)
    dens = density(a, t)
    peak = dens.max()
    ties = np.flatnonzero(dens >= peak * (1.0 - 1e-12))
    tie_ts = t[ties]
    order = np.lexsort((tie_ts, np.abs(tie_ts)))
    return mean, var, float(tie_ts[order[0]])


def blend(new: GaussMixture, old: GaussMixture, beta: float, m: int) -> GaussMixture:
    """Damped convex combination beta*new + (1-beta)*old, reduced to m."""
    if beta >= 1.0:
        return new
    mixed = GaussMixture(
        w=np.concatenate([beta * new.w, (1.0 - beta) * old.w]),
        mu=np.concatenate([new.mu, old.mu]),
        var=np.concatenate([new.var, old.var]),
    )
    return reduce_ipra(mixed, m)
