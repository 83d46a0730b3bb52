"""Flat ``key = value`` experiment configuration with dotted keys.

Files are UTF-8 text, ``#`` starts a comment, and sweep values are
comma-separated lists (e.g. ``matrix.m_sweep = 200, 300, 400``).  Unknown
keys are rejected by name so typos fail before any trial runs.
"""

from dataclasses import dataclass, field

from .errors import ConfigError
from .grid_pdf import Grid, _odd_smooth_at_least
from .signal_model import MixturePrior

KNOWN_ALGORITHMS = ("csbp", "iht", "median", "exact")


def parse_config_text(text: str) -> dict:
    """Dotted-key mapping from a config file body."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _to_bool(key, raw):
    low = str(raw).strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _to_int(key, raw):
    try:
        return int(str(raw).strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _to_float(key, raw):
    try:
        return float(str(raw).strip())
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _to_list(key, raw, conv):
    items = [tok.strip() for tok in str(raw).split(",") if tok.strip()]
    if not items:
        raise ConfigError(f"{key}: sweep list must be nonempty")
    return [conv(key, tok) for tok in items]


@dataclass
class ModelCfg:
    n: int = 1000
    s: float = 0.1
    sigma0: float = 1.0
    sigma1: float = 10.0
    c_components: int = 2
    n_sweep: list = field(default_factory=list)
    c_sweep: list = field(default_factory=list)

    def prior(self) -> MixturePrior:
        return MixturePrior(s=self.s, sigma0=self.sigma0, sigma1=self.sigma1)


@dataclass
class MatrixCfg:
    l: int = 20
    m: int | None = None
    m_sweep: list = field(default_factory=list)
    regular_columns: bool = False
    seed: int = 1


@dataclass
class DecoderCfg:
    codec: str = "grid"
    p: int | None = None
    delta: float | None = None
    beta: float = 0.5
    max_iters: int | None = None
    tol: float = 1e-4
    m_comps: int = 6

    def grid(self, prior: MixturePrior) -> Grid:
        delta = self.delta if self.delta is not None else prior.sigma0 / 2.0
        if self.p is not None:
            return Grid(p=self.p, delta=delta)
        need = int(-(-2 * 6.0 * prior.sigma1 // delta))
        return Grid(p=_odd_smooth_at_least(need), delta=delta)


@dataclass
class NoiseCfg:
    sigma_z2: float = 0.0
    sigma_z2_sweep: list = field(default_factory=list)


@dataclass
class RunCfg:
    trials: int = 100
    algorithms: tuple = ("csbp",)
    base_seed: int = 0


@dataclass
class OutputCfg:
    path: str | None = None


@dataclass
class ExperimentConfig:
    model: ModelCfg = field(default_factory=ModelCfg)
    matrix: MatrixCfg = field(default_factory=MatrixCfg)
    decoder: DecoderCfg = field(default_factory=DecoderCfg)
    noise: NoiseCfg = field(default_factory=NoiseCfg)
    run: RunCfg = field(default_factory=RunCfg)
    output: OutputCfg = field(default_factory=OutputCfg)

    def m_values(self) -> list:
        if self.matrix.m_sweep:
            return list(self.matrix.m_sweep)
        if self.matrix.m is None:
            raise ConfigError("matrix.m or matrix.m_sweep is required")
        return [self.matrix.m]

    def sigma_z2_values(self) -> list:
        if self.noise.sigma_z2_sweep:
            return list(self.noise.sigma_z2_sweep)
        return [self.noise.sigma_z2]


_SETTERS = {
    "model.n": lambda c, k, v: setattr(c.model, "n", _to_int(k, v)),
    "model.s": lambda c, k, v: setattr(c.model, "s", _to_float(k, v)),
    "model.sigma0": lambda c, k, v: setattr(c.model, "sigma0", _to_float(k, v)),
    "model.sigma1": lambda c, k, v: setattr(c.model, "sigma1", _to_float(k, v)),
    "model.c_components": lambda c, k, v: setattr(c.model, "c_components", _to_int(k, v)),
    "model.n_sweep": lambda c, k, v: setattr(c.model, "n_sweep", _to_list(k, v, _to_int)),
    "model.c_sweep": lambda c, k, v: setattr(c.model, "c_sweep", _to_list(k, v, _to_int)),
    "matrix.l": lambda c, k, v: setattr(c.matrix, "l", _to_int(k, v)),
    "matrix.m": lambda c, k, v: setattr(c.matrix, "m", _to_int(k, v)),
    "matrix.m_sweep": lambda c, k, v: setattr(c.matrix, "m_sweep", _to_list(k, v, _to_int)),
    "matrix.regular_columns": lambda c, k, v: setattr(
        c.matrix, "regular_columns", _to_bool(k, v)
    ),
    "matrix.seed": lambda c, k, v: setattr(c.matrix, "seed", _to_int(k, v)),
    "decoder.codec": lambda c, k, v: setattr(c.decoder, "codec", str(v).strip()),
    "decoder.p": lambda c, k, v: setattr(c.decoder, "p", _to_int(k, v)),
    "decoder.delta": lambda c, k, v: setattr(c.decoder, "delta", _to_float(k, v)),
    "decoder.beta": lambda c, k, v: setattr(c.decoder, "beta", _to_float(k, v)),
    "decoder.max_iters": lambda c, k, v: setattr(c.decoder, "max_iters", _to_int(k, v)),
    "decoder.tol": lambda c, k, v: setattr(c.decoder, "tol", _to_float(k, v)),
    "decoder.m_comps": lambda c, k, v: setattr(c.decoder, "m_comps", _to_int(k, v)),
    "noise.sigma_z2": lambda c, k, v: setattr(c.noise, "sigma_z2", _to_float(k, v)),
    "noise.sigma_z2_sweep": lambda c, k, v: setattr(
        c.noise, "sigma_z2_sweep", _to_list(k, v, _to_float)
    ),
    "run.trials": lambda c, k, v: setattr(c.run, "trials", _to_int(k, v)),
    "run.algorithms": lambda c, k, v: setattr(
        c.run, "algorithms", tuple(tok.strip() for tok in str(v).split(",") if tok.strip())
    ),
    "run.base_seed": lambda c, k, v: setattr(c.run, "base_seed", _to_int(k, v)),
    "output.path": lambda c, k, v: setattr(c.output, "path", str(v).strip()),
}


def build_config(mapping: dict) -> ExperimentConfig:
    """Validate a dotted-key mapping into an ExperimentConfig."""
    cfg = ExperimentConfig()
    for key, value in mapping.items():
        setter = _SETTERS.get(key)
        if setter is None:
            raise ConfigError(f"unknown config key {key!r}")
        setter(cfg, key, value)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    if cfg.run.trials < 1:
        raise ConfigError(f"run.trials must be >= 1, got {cfg.run.trials}")
    unknown = [a for a in cfg.run.algorithms if a not in KNOWN_ALGORITHMS]
    if unknown:
        raise ConfigError(f"unknown algorithms {unknown}; choose from {KNOWN_ALGORITHMS}")
    if not cfg.run.algorithms:
        raise ConfigError("run.algorithms must be nonempty")
    if "exact" in cfg.run.algorithms and cfg.model.n > 16:
        raise ConfigError("algorithm 'exact' needs model.n <= 16")
    if not 0.0 < cfg.model.s < 1.0:
        raise ConfigError(f"model.s must be in (0, 1), got {cfg.model.s}")
    if not 0.0 < cfg.model.sigma0 < cfg.model.sigma1:
        raise ConfigError("need 0 < model.sigma0 < model.sigma1")
    if cfg.decoder.codec not in ("grid", "mog"):
        raise ConfigError(f"decoder.codec must be grid or mog, got {cfg.decoder.codec!r}")
    for c in list(cfg.model.c_sweep) + [cfg.model.c_components]:
        if c < 2:
            raise ConfigError(f"mixture component count must be >= 2, got {c}")
        if (c - 1) * cfg.model.s >= 1.0:
            raise ConfigError(f"(c-1)*s must stay below 1, got c={c} s={cfg.model.s}")
    if cfg.matrix.regular_columns:
        for m in cfg.matrix.m_sweep or ([cfg.matrix.m] if cfg.matrix.m else []):
            if (cfg.matrix.l * m) % cfg.model.n != 0:
                raise ConfigError(
                    f"regular columns need l*m divisible by n: l={cfg.matrix.l} m={m} n={cfg.model.n}"
                )
