"""Command-line front end.

Subcommands cover matrix generation, encoding, decoding, the experiment
sweeps, bound validation, and a small-instance comparison against the
enumeration oracle.  Exit codes: 0 success, 2 configuration/input error,
3 runtime error.
"""

import argparse
import sys

import numpy as np

from . import vectors
from .config import build_config, load_config
from .decoder import DecoderConfig, decode
from .encoder import MatrixParams, encode, generate_matrix, load_matrix, save_matrix
from .errors import (
    ConfigError,
    ParameterError,
    ParseError,
    RangeError,
    ShapeError,
    SizeError,
)
from .experiments import rows_to_csv, run_mismatch, run_sweep, run_timing
from .oracles import exact_mmse, validate_norm_bounds
from .signal_model import MixturePrior


def _add_config_args(sub):
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    sub.add_argument("--out", help="output path (overrides output.path)")
    sub.add_argument("--workers", type=int, help="worker threads (else CSBP_THREADS)")


def _load_experiment_config(args):
    mapping = load_config(args.config) if args.config else {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        mapping[key.strip()] = value.strip()
    return build_config(mapping)


def _emit_csv(rows, path):
    text = rows_to_csv(rows)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_generate_matrix(args):
    params = MatrixParams(
        n=args.n, m=args.m, l=args.l, regular_columns=args.regular_columns, seed=args.seed
    )
    save_matrix(generate_matrix(params), args.out)
    return 0


def _cmd_encode(args):
    phi = load_matrix(args.matrix)
    x = vectors.load_vector(args.signal)
    vectors.save_vector(encode(phi, x), args.out)
    return 0


def _cmd_decode(args):
    cfg = _load_experiment_config(args)
    phi = load_matrix(args.matrix)
    y = vectors.load_vector(args.measurements)
    prior = cfg.model.prior()
    dec_cfg = DecoderConfig(
        codec=cfg.decoder.codec,
        grid=cfg.decoder.grid(prior) if cfg.decoder.codec == "grid" else None,
        m_comps=cfg.decoder.m_comps,
        beta=cfg.decoder.beta,
        max_iters=cfg.decoder.max_iters,
        tol=cfg.decoder.tol,
        sigma_z2=cfg.noise.sigma_z2,
    )
    result = decode(phi, y, prior, dec_cfg)
    vectors.save_vector(result.x_mmse, args.out)
    if args.map_out:
        vectors.save_vector(result.x_map, args.map_out)
    if args.q_out:
        vectors.save_vector(result.q_posterior, args.q_out)
    print(
        f"decoded n={phi.n} m={phi.m}: iters={result.iters_run} "
        f"converged={result.converged} residual_l2={result.residual_l2:.6g}",
        file=sys.stderr,
    )
    return 0


def _cmd_sweep(args):
    cfg = _load_experiment_config(args)
    rows = run_sweep(cfg, workers=args.workers)
    _emit_csv(rows, args.out or cfg.output.path)
    return 0


def _cmd_timing(args):
    cfg = _load_experiment_config(args)
    rows, fit = run_timing(cfg, workers=args.workers)
    _emit_csv(rows, args.out or cfg.output.path)
    for algorithm, slope in fit.items():
        print(f"loglog-exponent {algorithm}: {slope:.4f}", file=sys.stderr)
    return 0


def _cmd_mismatch(args):
    cfg = _load_experiment_config(args)
    rows = run_mismatch(cfg, workers=args.workers)
    _emit_csv(rows, args.out or cfg.output.path)
    return 0


def _cmd_validate_bounds(args):
    prior = MixturePrior(s=args.s, sigma0=args.sigma0, sigma1=args.sigma1)
    report = validate_norm_bounds(prior, args.n, args.gamma, args.trials, args.seed)
    lines = list(report.lines())
    lines.append(
        f"regime: z={report.regime_z:.3f}"
        + (" (out of asymptotic regime)" if report.out_of_regime else "")
    )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def _cmd_oracle_compare(args):
    cfg = _load_experiment_config(args)
    if cfg.model.n > 16:
        raise ConfigError(f"oracle comparison needs model.n <= 16, got {cfg.model.n}")
    if "exact" not in cfg.run.algorithms or "csbp" not in cfg.run.algorithms:
        cfg.run.algorithms = ("csbp", "exact")
    rows = run_sweep(cfg, workers=args.workers)
    _emit_csv(rows, args.out or cfg.output.path)
    med = {
        row.algorithm: row.l2_error
        for row in rows
        if row.trial == -1
    }
    for algorithm, err in sorted(med.items()):
        print(f"median l2 error {algorithm}: {err:.6g}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csbp",
        description="Sparse-matrix compressive sensing: BP decoding and experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-matrix", help="draw a sparse sign matrix")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--l", type=int, required=True)
    gen.add_argument("--regular-columns", action="store_true")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_generate_matrix)

    enc = sub.add_parser("encode", help="measure a signal with a stored matrix")
    enc.add_argument("--matrix", required=True)
    enc.add_argument("--signal", required=True)
    enc.add_argument("--out", required=True)
    enc.set_defaults(func=_cmd_encode)

    dec = sub.add_parser("decode", help="BP-decode stored measurements")
    dec.add_argument("--matrix", required=True)
    dec.add_argument("--measurements", required=True)
    dec.add_argument("--config")
    dec.add_argument("--set", action="append", metavar="KEY=VALUE")
    dec.add_argument("--out", required=True, help="posterior-mean estimate file")
    dec.add_argument("--map-out", help="optional posterior-mode estimate file")
    dec.add_argument("--q-out", help="optional state-posterior file")
    dec.set_defaults(func=_cmd_decode)

    for name, func in (
        ("sweep", _cmd_sweep),
        ("timing", _cmd_timing),
        ("mismatch", _cmd_mismatch),
        ("oracle-compare", _cmd_oracle_compare),
    ):
        cmd = sub.add_parser(name)
        _add_config_args(cmd)
        cmd.set_defaults(func=func)

    vb = sub.add_parser("validate-bounds", help="Monte Carlo norm-tail checks")
    vb.add_argument("--n", type=int, required=True)
    vb.add_argument("--gamma", type=float, required=True)
    vb.add_argument("--trials", type=int, default=10000)
    vb.add_argument("--seed", type=int, default=0)
    vb.add_argument("--s", type=float, default=0.1)
    vb.add_argument("--sigma0", type=float, default=1.0)
    vb.add_argument("--sigma1", type=float, default=10.0)
    vb.add_argument("--out")
    vb.set_defaults(func=_cmd_validate_bounds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ConfigError,
        ParameterError,
        ParseError,
        RangeError,
        ShapeError,
        SizeError,
        FileNotFoundError,
    ) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
