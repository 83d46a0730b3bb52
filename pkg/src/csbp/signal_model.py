"""Two-state and multi-level mixture-Gaussian signal models.

A length-N signal draws each coefficient independently: with probability
``s`` the coefficient is in the large state (std-dev ``sigma1``), otherwise
in the small state (std-dev ``sigma0``).  The multi-level variant layers
``c - 1`` independent large components of growing amplitude on top of a
background, which is the model-mismatch generator used by the experiment
harness.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import make_rng


@dataclass(frozen=True)
class MixturePrior:
    """Sparsity rate and the two state std-devs of the signal prior."""

    s: float
    sigma0: float
    sigma1: float

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ParameterError(f"sparsity rate must be in (0, 1), got {self.s}")
        if not 0.0 < self.sigma0 < self.sigma1:
            raise ParameterError(
                f"need 0 < sigma0 < sigma1, got sigma0={self.sigma0} sigma1={self.sigma1}"
            )

    @property
    def second_moment(self) -> float:
        """E[X^2] = s*sigma1^2 + (1-s)*sigma0^2."""
        return self.s * self.sigma1**2 + (1.0 - self.s) * self.sigma0**2


@dataclass(frozen=True)
class MultiLevelPrior:
    """Background plus c-1 optional large components of amplitude k*sigma2.

    Every coefficient carries a Normal(0, sigma0^2) background.  For each
    level k in 1..c-1, independently with probability ``s``, the coefficient
    additionally carries an independent Normal(0, (k*sigma2)^2) term, so a
    single coefficient may stack several levels and the effective rate of
    "has any large term" is 1 - (1-s)^(c-1).
    """

    s: float
    c: int
    sigma0: float
    sigma2: float

    def __post_init__(self):
        if self.c < 2:
            raise ParameterError(f"component count must be >= 2, got {self.c}")
        if not 0.0 < self.s < 1.0 or (self.c - 1) * self.s >= 1.0:
            raise ParameterError(
                f"need (c-1)*s < 1 with 0 < s, got s={self.s} c={self.c}"
            )
        if self.sigma2 < 0.0:
            raise ParameterError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.sigma0 <= 0.0:
            raise ParameterError(f"sigma0 must be > 0, got {self.sigma0}")

    @property
    def second_moment(self) -> float:
        ssum = sum(k * k for k in range(1, self.c))
        return self.sigma0**2 + self.s * self.sigma2**2 * ssum


@dataclass(frozen=True)
class SignalInstance:
    """A sampled signal, its per-coefficient states, and the seed used."""

    x: np.ndarray
    q: np.ndarray
    seed: int

    def __post_init__(self):
        if self.x.shape != self.q.shape:
            raise ParameterError("x and q must have identical length")


def sample_signal(prior: MixturePrior, n: int, seed: int) -> SignalInstance:
    """Draw an n-coefficient signal from the two-state mixture prior."""
    if n < 1:
        raise ParameterError(f"signal length must be >= 1, got {n}")
    rng = make_rng(seed)
    q = (rng.random(n) < prior.s).astype(np.int8)
    z = rng.standard_normal(n)
    x = z * np.where(q == 1, prior.sigma1, prior.sigma0)
    return SignalInstance(x=x, q=q, seed=seed)


def sample_multilevel_signal(prior: MultiLevelPrior, n: int, seed: int) -> SignalInstance:
    """Draw from the multi-level model; q records the highest active level."""
    if n < 1:
        raise ParameterError(f"signal length must be >= 1, got {n}")
    rng = make_rng(seed)
    x = prior.sigma0 * rng.standard_normal(n)
    q = np.zeros(n, dtype=np.int8)
    for level in range(1, prior.c):
        active = rng.random(n) < prior.s
        x = x + np.where(active, level * prior.sigma2 * rng.standard_normal(n), 0.0)
        q = np.where(active, np.int8(level), q)
    return SignalInstance(x=x, q=q, seed=seed)


def derive_sigma2(prior2: MixturePrior, c: int) -> float:
    """Amplitude step that preserves the two-state model's total energy.

    sigma2 = sqrt((sigma1^2 - sigma0^2) / sum_{k=1}^{c-1} k^2), so the
    multi-level second moment equals s*sigma1^2 + (1-s)*sigma0^2.
    """
    if c < 2:
        raise ParameterError(f"component count must be >= 2, got {c}")
    ssum = sum(k * k for k in range(1, c))
    return float(np.sqrt((prior2.sigma1**2 - prior2.sigma0**2) / ssum))


def add_noise(y: np.ndarray, sigma_z2: float, seed: int) -> np.ndarray:
    """Add iid Normal(0, sigma_z2) noise; sigma_z2 = 0 returns y unchanged."""
    if sigma_z2 < 0.0:
        raise ParameterError(f"noise variance must be >= 0, got {sigma_z2}")
    if sigma_z2 == 0.0:
        return y
    rng = make_rng(seed)
    return y + np.sqrt(sigma_z2) * rng.standard_normal(len(y))
