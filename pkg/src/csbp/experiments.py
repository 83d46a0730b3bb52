"""Deterministic experiment harness: measurement sweeps, timing runs, and
model-mismatch runs, emitted as CSV.

Every trial derives its seeds from (base seed, sweep point, trial index), so
output is byte-identical across repeated runs and across worker counts; the
worker pool only reorders computation, never results.  All algorithms within
a trial consume the same matrix, signal, and measurements (asserted by
hashing).  Sweep and mismatch rows carry a deterministic work proxy in the
``seconds`` column to keep byte-identity; wall-clock times are reported by
the timing run only, which is exempt from byte-identity for that column.
"""

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .decoder import DecoderConfig, decode
from .encoder import MatrixParams, encode, generate_matrix
from .errors import ConfigError
from .oracles import default_group_rows, exact_mmse, iht_decode, median_decode
from .rng import derive_seed
from .signal_model import (
    MultiLevelPrior,
    add_noise,
    derive_sigma2,
    sample_multilevel_signal,
    sample_signal,
)

CSV_COLUMNS = (
    "experiment",
    "algorithm",
    "n",
    "m",
    "l",
    "s",
    "sigma0",
    "sigma1",
    "sigma_z2",
    "c_components",
    "codec",
    "trial",
    "seed",
    "l2_error",
    "linf_error",
    "iters",
    "converged",
    "seconds",
)

MEDIAN_TRIAL = -1
MEAN_TRIAL = -2


@dataclass(frozen=True)
class TrialRow:
    experiment: str
    algorithm: str
    n: int
    m: int
    l: int
    s: float
    sigma0: float
    sigma1: float
    sigma_z2: float
    c_components: int
    codec: str
    trial: int
    seed: int
    l2_error: float
    linf_error: float
    iters: float
    converged: float
    seconds: float

    def as_csv(self) -> str:
        def fmt(v):
            if isinstance(v, float):
                return repr(float(v))
            return str(v)

        return ",".join(fmt(getattr(self, col)) for col in CSV_COLUMNS)


def rows_to_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(row.as_csv() for row in rows)
    return "\n".join(lines) + "\n"


def worker_count(explicit: int | None = None) -> int:
    """Worker threads: explicit argument, else CSBP_THREADS, else 1."""
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get("CSBP_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CSBP_THREADS must be an integer, got {env!r}") from None
    return 1


def _instance_digest(phi, x, y) -> str:
    h = hashlib.blake2b(digest_size=16)
    for arr in (phi.cols, phi.signs, x, y):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _decoder_config(cfg: ExperimentConfig, sigma_z2: float) -> DecoderConfig:
    dec = cfg.decoder
    prior = cfg.model.prior()
    return DecoderConfig(
        codec=dec.codec,
        grid=dec.grid(prior) if dec.codec == "grid" else None,
        m_comps=dec.m_comps,
        beta=dec.beta,
        max_iters=dec.max_iters,
        tol=dec.tol,
        sigma_z2=sigma_z2,
    )


def _sample_point_signal(cfg, c_components, m, sigma_z2, trial):
    """Matrix, signal, and measurements for one trial of one sweep point."""
    model = cfg.model
    prior = model.prior()
    phi_seed = derive_seed(cfg.matrix.seed, "phi", m, trial)
    x_seed = derive_seed(cfg.run.base_seed, "x", m, sigma_z2, c_components, trial)
    z_seed = derive_seed(cfg.run.base_seed, "z", m, sigma_z2, c_components, trial)
    phi = generate_matrix(
        MatrixParams(
            n=model.n,
            m=m,
            l=cfg.matrix.l,
            regular_columns=cfg.matrix.regular_columns,
            seed=phi_seed,
        )
    )
    if c_components == 2:
        sig = sample_signal(prior, model.n, x_seed)
    else:
        ml = MultiLevelPrior(
            s=model.s,
            c=c_components,
            sigma0=model.sigma0,
            sigma2=derive_sigma2(prior, c_components),
        )
        sig = sample_multilevel_signal(ml, model.n, x_seed)
    y = add_noise(encode(phi, sig.x), sigma_z2, z_seed)
    return phi, sig, y, x_seed


def _run_algorithm(cfg, algorithm, phi, y, sigma_z2, timing: bool):
    """Estimate vector plus (iters, converged, seconds) for one algorithm."""
    model = cfg.model
    prior = model.prior()
    t0 = time.perf_counter()
    if algorithm == "csbp":
        res = decode(phi, y, prior, _decoder_config(cfg, sigma_z2))
        est = res.x_mmse
        iters = float(res.iters_run)
        converged = 1.0 if res.converged else 0.0
        proxy = res.telemetry["work_units"]
    elif algorithm == "iht":
        k = max(1, round(model.s * model.n))
        est, info = iht_decode(phi, y, k=k, with_info=True)
        iters = float(info["iters"])
        converged = 1.0
        proxy = max(info["iters"] * phi.m * phi.l / 1e9, 1e-9)
    elif algorithm == "median":
        est = median_decode(phi, y, m1=default_group_rows(phi.m, phi.n))
        iters = 1.0
        converged = 1.0
        proxy = max(phi.m * phi.l / 1e9, 1e-9)
    elif algorithm == "exact":
        sz = max(sigma_z2, 1e-6 * model.sigma0**2)
        est, _ = exact_mmse(phi, y, prior, sz)
        iters = 1.0
        converged = 1.0
        proxy = max((1 << model.n) * phi.m**3 / 1e9, 1e-9)
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    seconds = time.perf_counter() - t0 if timing else proxy
    return est, iters, converged, seconds


def _trial_rows(cfg, experiment, c_components, m, sigma_z2, trial, timing=False):
    phi, sig, y, x_seed = _sample_point_signal(cfg, c_components, m, sigma_z2, trial)
    digest = None
    rows = []
    for algorithm in cfg.run.algorithms:
        d = _instance_digest(phi, sig.x, y)
        if digest is None:
            digest = d
        assert d == digest, "algorithms must share one instance"
        est, iters, converged, seconds = _run_algorithm(cfg, algorithm, phi, y, sigma_z2, timing)
        err = est - sig.x
        rows.append(
            TrialRow(
                experiment=experiment,
                algorithm=algorithm,
                n=cfg.model.n,
                m=m,
                l=cfg.matrix.l,
                s=cfg.model.s,
                sigma0=cfg.model.sigma0,
                sigma1=cfg.model.sigma1,
                sigma_z2=sigma_z2,
                c_components=c_components,
                codec=cfg.decoder.codec if algorithm == "csbp" else "-",
                trial=trial,
                seed=x_seed,
                l2_error=float(np.linalg.norm(err)),
                linf_error=float(np.abs(err).max()),
                iters=iters,
                converged=converged,
                seconds=seconds,
            )
        )
    return rows


def _summary_rows(trial_rows):
    """Median (trial=-1) and mean (trial=-2) rows over one point/algorithm."""
    out = []
    template = trial_rows[0]
    for marker, agg in ((MEDIAN_TRIAL, np.median), (MEAN_TRIAL, np.mean)):
        out.append(
            TrialRow(
                experiment=template.experiment,
                algorithm=template.algorithm,
                n=template.n,
                m=template.m,
                l=template.l,
                s=template.s,
                sigma0=template.sigma0,
                sigma1=template.sigma1,
                sigma_z2=template.sigma_z2,
                c_components=template.c_components,
                codec=template.codec,
                trial=marker,
                seed=-1,
                l2_error=float(agg([r.l2_error for r in trial_rows])),
                linf_error=float(agg([r.linf_error for r in trial_rows])),
                iters=float(agg([r.iters for r in trial_rows])),
                converged=float(np.mean([r.converged for r in trial_rows])),
                seconds=float(agg([r.seconds for r in trial_rows])),
            )
        )
    return out


def _run_points(cfg, experiment, points, timing=False, workers=None):
    """Run trials x points x algorithms; emit rows in canonical order."""
    n_workers = worker_count(workers)
    tasks = [
        (pi, trial)
        for pi in range(len(points))
        for trial in range(cfg.run.trials)
    ]

    def run_task(task):
        pi, trial = task
        c_components, m, sigma_z2 = points[pi]
        return task, _trial_rows(cfg, experiment, c_components, m, sigma_z2, trial, timing)

    results = {}
    if n_workers == 1:
        for task in tasks:
            key, rows = run_task(task)
            results[key] = rows
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for key, rows in pool.map(run_task, tasks):
                results[key] = rows
    out = []
    for pi in range(len(points)):
        by_algorithm = {a: [] for a in cfg.run.algorithms}
        for trial in range(cfg.run.trials):
            for row in results[(pi, trial)]:
                by_algorithm[row.algorithm].append(row)
        for algorithm in cfg.run.algorithms:
            rows = by_algorithm[algorithm]
            out.extend(rows)
            out.extend(_summary_rows(rows))
    return out


def run_sweep(cfg: ExperimentConfig, workers: int | None = None):
    """Measurement-count / noise sweep over the configured grid of points."""
    points = [
        (cfg.model.c_components, m, sz)
        for m in cfg.m_values()
        for sz in cfg.sigma_z2_values()
    ]
    return _run_points(cfg, "sweep", points, timing=False, workers=workers)


def run_mismatch(cfg: ExperimentConfig, workers: int | None = None):
    """Multi-level signals decoded with the unchanged two-state prior."""
    if not cfg.model.c_sweep:
        raise ConfigError("mismatch run needs model.c_sweep")
    points = [
        (c, m, sz)
        for m in cfg.m_values()
        for c in cfg.model.c_sweep
        for sz in cfg.sigma_z2_values()
    ]
    return _run_points(cfg, "mismatch", points, timing=False, workers=workers)


def run_timing(cfg: ExperimentConfig, workers: int | None = None):
    """Wall-clock per decode over a signal-length sweep with m = 0.4*n.

    Returns (rows, fit) where fit maps each algorithm to the slope of its
    log-log regression of median seconds against n.
    """
    if not cfg.model.n_sweep:
        raise ConfigError("timing run needs model.n_sweep")
    if sorted(cfg.model.n_sweep) != list(cfg.model.n_sweep):
        raise ConfigError("model.n_sweep must be ascending")
    all_rows = []
    for n in cfg.model.n_sweep:
        point_cfg = _with_n(cfg, n)
        rows = _run_points(
            point_cfg,
            "timing",
            [(cfg.model.c_components, point_cfg.matrix.m, cfg.noise.sigma_z2)],
            timing=True,
            workers=workers,
        )
        all_rows.extend(rows)
    fit = {}
    for algorithm in cfg.run.algorithms:
        pts = [
            (row.n, row.seconds)
            for row in all_rows
            if row.algorithm == algorithm and row.trial == MEDIAN_TRIAL
        ]
        if len(pts) >= 2:
            ns, secs = zip(*pts)
            slope = float(np.polyfit(np.log(ns), np.log(secs), 1)[0])
            fit[algorithm] = slope
    return all_rows, fit


def _with_n(cfg: ExperimentConfig, n: int) -> ExperimentConfig:
    import copy

    point_cfg = copy.deepcopy(cfg)
    point_cfg.model.n = n
    m = max(1, round(0.4 * n))
    if cfg.matrix.regular_columns:
        step = n // np.gcd(cfg.matrix.l, n)
        m = int(-(-m // step) * step)
    point_cfg.matrix.m = int(m)
    point_cfg.matrix.m_sweep = []
    return point_cfg
