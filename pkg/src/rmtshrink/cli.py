"""Command-line interface: ``rmtshrink <subcommand> ...``.

Exit codes: 0 success, 1 input error, 2 numerical failure, 3 verification
failure.  For ``simulate``, values in the config file take precedence over
command-line flags, which take precedence over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import io as rio
from .errors import InputError, NonConvergence, NumericalError
from .overlaps import predicted_overlap_uu
from .shrinkage import LossKind, SampleDecomposition, assemble_estimator, shrink
from .simlab import SimulationConfig, observable_diagonal, run_study
from .spectral import (
    boundary_stieltjes_array,
    find_support,
    solve_stieltjes_array,
)
from .verification import run_kernel_suite

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3

log = logging.getLogger("rmtshrink")

PACKAGE_CONFIGS = Path(__file__).resolve().parent / "configs"


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _emit(text: str, out: str | None, default_name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.is_dir():
        path = path / default_name
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def _out_dir(out: str | None) -> Path:
    if out is None:
        raise InputError("--out is required for this command")
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path


def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise InputError(f"cannot parse complex number {text!r}") from exc


def _parse_eta(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a float or 'auto', got {text!r}") from None


def _parse_grid(spec: str) -> np.ndarray:
    """start:stop:count[:eta]; eta omitted (or 0) means real-axis boundary values."""
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise InputError("grid must be start:stop:count[:eta]")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        eta = float(parts[3]) if len(parts) == 4 else 0.0
    except ValueError as exc:
        raise InputError(f"malformed grid {spec!r}") from exc
    if count <= 0:
        raise InputError("grid count must be positive")
    return np.linspace(start, stop, count) + 1j * eta


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_solve_mp(args: argparse.Namespace) -> int:
    sp = rio.read_spectrum_csv(args.spectrum, args.n, args.dimension)
    zs: list[complex] = [_parse_complex(z) for z in (args.z or [])]
    if args.grid:
        zs.extend(_parse_grid(args.grid).tolist())
    if not zs:
        raise InputError("give at least one --z or a --grid")
    rows = []
    for z in zs:
        try:
            if z.imag == 0:
                if z.real <= 0:
                    raise InputError(f"real z must be positive (got {z.real!r})")
                mf = complex(boundary_stieltjes_array(sp, z.real)[0])
                w = complex(np.sqrt(z.real))
            else:
                mf = complex(solve_stieltjes_array(sp, z)[0])
                w = complex(np.sqrt(z))
        except NonConvergence as exc:
            raise NonConvergence(f"solver failed at z = {z}: {exc}", exc.residual, exc.guard) from exc
        m = w * mf
        rows.append((z.real, z.imag, mf.real, mf.imag, m.real, m.imag, max(mf.imag, 0.0) / np.pi))
    text = rio.write_csv(None, ["z_re", "z_im", "m_frak_re", "m_frak_im", "m_re", "m_im", "density"], rows)
    _emit(text, args.out, "stieltjes.csv")
    return EXIT_OK


def cmd_support(args: argparse.Namespace) -> int:
    sp = rio.read_spectrum_csv(args.spectrum, args.n, args.dimension)
    support = find_support(sp)
    if args.out is None:
        sys.stdout.write(rio.write_edges_csv(None, support))
        sys.stdout.write(rio.write_support_csv(None, support))
        return EXIT_OK
    out = _out_dir(args.out)
    rio.write_edges_csv(out / "edges.csv", support)
    rio.write_support_csv(out / "classical_locations.csv", support)
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    y = rio.read_data(args.data)
    m, n = y.shape
    if m >= n:
        raise InputError(f"estimation requires M < N (got M={m}, N={n})")
    kind = LossKind.parse(args.loss)
    decomp = SampleDecomposition.from_eigh(y)
    result = shrink(decomp, kind, args.eta)
    out = _out_dir(args.out)
    rio.write_shrinkage_csv(out / "shrinkage.csv", decomp.sample_eigenvalues, result)
    rio.write_blob(out / "estimator.shrk", assemble_estimator(decomp, result))
    if result.inversions.size:
        log.warning("%d ordering inversions among shrunk eigenvalues", result.inversions.size)
    return EXIT_OK


def cmd_predict_overlap(args: argparse.Namespace) -> int:
    sp = rio.read_spectrum_csv(args.spectrum, args.n, args.dimension)
    support = find_support(sp)
    gam = support.classical_locations
    if args.diagonal:
        rows = rio._read_numeric_rows(args.diagonal)
        diag = np.array([r[1][0] for r in rows])
    else:
        diag = observable_diagonal(args.observable, sp)
    pred = np.real(predicted_overlap_uu(sp, gam, diag))
    k_idx, i_idx = support.rank_in_bulk()
    rows_out = ((int(k_idx[t]) + 1, int(i_idx[t]), gam[t], float(pred[t])) for t in range(gam.size))
    _emit(rio.write_csv(None, ["k", "i", "gamma", "predicted"], rows_out), args.out, "predicted_overlaps.csv")
    return EXIT_OK


def cmd_verify_kernels(args: argparse.Namespace) -> int:
    fault = 1e-3 if args.inject_t_fault else 0.0
    results = run_kernel_suite(n=args.n, seed=args.seed, multiplier=args.multiplier, trials=args.trials, t_fault=fault)
    rows = [(r.name, r.max_residual, r.threshold, "pass" if r.passed else "fail") for r in results]
    _emit(rio.write_csv(None, ["identity", "max_residual", "threshold", "status"], rows), args.out, "verify_kernels.csv")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFICATION


def _bundled_or_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = PACKAGE_CONFIGS / f"{name}.json"
    if bundled.exists():
        return bundled
    raise InputError(f"config {name!r} not found (bundled configs: {sorted(q.stem for q in PACKAGE_CONFIGS.glob('*.json'))})")


def cmd_simulate(args: argparse.Namespace) -> int:
    path = _bundled_or_path(args.config)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    # config > flags > defaults
    if args.seed is not None:
        data.setdefault("seed", args.seed)
    if args.out is not None:
        data.setdefault("out_dir", args.out)
    config = SimulationConfig.from_dict(data)
    if config.out_dir is None:
        raise InputError("no output directory: set out_dir in the config or pass --out")
    out = _out_dir(config.out_dir)
    report = run_study(config)
    report.write(out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser and entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmtshrink", description="Nonlinear covariance shrinkage and random-matrix toolkit.")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")

    def spectrum_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("spectrum", help="one-column eigenvalue CSV or (value, weight) CSV")
        p.add_argument("--n", type=int, required=True, help="sample size N")
        p.add_argument("--dimension", type=int, default=None, help="M, needed for fractional weights")
        p.add_argument("--out", default=None, help="output file or directory (default: stdout)")

    p = sub.add_parser("solve-mp", parents=[common], help="solve the self-consistent equation at given points")
    spectrum_args(p)
    p.add_argument("--z", action="append", help="complex spectral parameter, e.g. 2+0.1j (repeatable)")
    p.add_argument("--grid", default=None, help="start:stop:count[:eta] along a horizontal line")
    p.set_defaults(func=cmd_solve_mp)

    p = sub.add_parser("support", parents=[common], help="support edges, bulk counts and classical locations")
    spectrum_args(p)
    p.set_defaults(func=cmd_support)

    p = sub.add_parser("estimate", parents=[common], help="nonlinear shrinkage estimate from a data matrix")
    p.add_argument("data", help="CSV (rows = variables) or SHRK blob")
    p.add_argument("--loss", choices=["f", "finv"], default="f")
    p.add_argument("--eta", type=_parse_eta, default=None, help="float in (0, 1) or 'auto' for N^(-1/2)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("predict-overlap", parents=[common], help="predicted <u_i, D u_i> at classical locations")
    spectrum_args(p)
    p.add_argument("--observable", choices=["identity", "sigma", "sigma_inv"], default="sigma")
    p.add_argument("--diagonal", default=None, help="CSV with the diagonal of D in the population basis")
    p.set_defaults(func=cmd_predict_overlap)

    p = sub.add_parser("verify-kernels", parents=[common], help="randomized identity and regularity checks")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multiplier", type=float, default=10.0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out", default=None)
    p.add_argument("--inject-t-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_kernels)

    p = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo study from a JSON config")
    p.add_argument("--config", required=True, help="config path or bundled name (fig1, rate, overlap)")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; map to the input-error code
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
