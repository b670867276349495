"""Monte Carlo harness: data generation, shrinkage and overlap studies, rate fits.

Each replication draws from its own generator seeded by
(master seed, N, replication index), so results do not depend on the
order or concurrency in which replications run.  Reports are written with
fixed float formatting and sorted keys so identical inputs give identical
bytes.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from .errors import InputError
from .io import write_csv, write_overlap_csv
from .overlaps import build_dilation, predicted_overlap_uu
from .shrinkage import (
    LossKind,
    SampleDecomposition,
    eigenvalue_loss,
    loss,
    assemble_estimator,
    oracle_shrinkage,
    shrink_frobenius,
    shrink_inverse_frobenius,
)
from .spectral import PopulationSpectrum, SupportStructure, find_support

DISTRIBUTIONS = ("gaussian", "rademacher", "uniform")
ETA_RULES = ("sqrt", "fixed", "power")
STUDIES = ("entrywise", "rate", "overlap")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    """Study configuration; see README for the JSON keys.

    ``spectrum`` is a list of (value, fraction) pairs; M = round(c N).
    ``eta_rule`` is "sqrt" (eta = N^{-1/2}), "fixed" (eta = eta_value) or
    "power" (eta = N^{-eta_value}).
    """

    spectrum: tuple[tuple[float, float], ...]
    c: float
    n_grid: tuple[int, ...]
    distribution: str = "gaussian"
    eta_rule: str = "sqrt"
    eta_value: float = 0.5
    replications: int = 20
    seed: int = 0
    out_dir: str | None = None
    study: str = "entrywise"
    observables: tuple[str, ...] = ("identity", "sigma", "sigma_inv")
    scatter: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        spec = tuple((float(v), float(f)) for v, f in self.spectrum)
        object.__setattr__(self, "spectrum", spec)
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "observables", tuple(self.observables))
        if not spec:
            raise InputError("spectrum must list at least one (value, fraction) pair")
        if any(v < 0 or f < 0 for v, f in spec):
            raise InputError("spectrum values and fractions must be nonnegative")
        if abs(sum(f for _, f in spec) - 1.0) > 1e-12:
            raise InputError("spectrum fractions must sum to 1")
        if not 0 < self.c:
            raise InputError("c must be positive")
        if not self.n_grid or any(n <= 0 for n in self.n_grid):
            raise InputError("n_grid must hold positive sample sizes")
        if self.distribution not in DISTRIBUTIONS:
            raise InputError(f"distribution must be one of {DISTRIBUTIONS}")
        if self.eta_rule not in ETA_RULES:
            raise InputError(f"eta_rule must be one of {ETA_RULES}")
        if self.replications <= 0:
            raise InputError("replications must be positive")
        if self.study not in STUDIES:
            raise InputError(f"study must be one of {STUDIES}")
        if self.workers <= 0:
            raise InputError("workers must be positive")
        for n in self.n_grid:
            if self.study != "overlap" and self.dimension(n) >= n:
                raise InputError(f"shrinkage studies need M < N (N={n}, M={self.dimension(n)})")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SimulationConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        for key in ("spectrum", "c", "n_grid"):
            if key not in data:
                raise InputError(f"config is missing {key!r}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"malformed config: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> SimulationConfig:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["spectrum"] = [list(p) for p in self.spectrum]
        d["n_grid"] = list(self.n_grid)
        d["observables"] = list(self.observables)
        return d

    def dimension(self, n: int) -> int:
        return int(round(self.c * n))

    def eta(self, n: int) -> float:
        if self.eta_rule == "sqrt":
            return n**-0.5
        if self.eta_rule == "fixed":
            return float(self.eta_value)
        return n ** -float(self.eta_value)

    def population(self, n: int) -> PopulationSpectrum:
        vals = [v for v, _ in self.spectrum]
        fracs = [f for _, f in self.spectrum]
        return PopulationSpectrum.from_weights(vals, fracs, n, self.dimension(n))


def replication_rng(seed: int, n: int, rep: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, N, replication)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(n), int(rep)])))


# --------------------------------------------------------------------------
# data generation and rigidity
# --------------------------------------------------------------------------


def generate_sample(
    spectrum: PopulationSpectrum,
    N: int,  # noqa: N803
    distribution: str = "gaussian",
    seed: int | np.random.Generator = 0,
) -> np.ndarray:
    """Y = sqrt(N) Sigma^{1/2} X in the population eigenbasis, X with variance-1/N entries."""
    if distribution not in DISTRIBUTIONS:
        raise InputError(f"distribution must be one of {DISTRIBUTIONS}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(int(seed)))
    shape = (spectrum.M, int(N))
    if distribution == "gaussian":
        z = rng.standard_normal(shape)
    elif distribution == "rademacher":
        z = rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
    else:
        z = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)
    # sqrt(N) X = z has unit variance entries
    return np.sqrt(spectrum.eigenvalues)[:, None] * z


@dataclass(frozen=True, eq=False)
class RigidityReport:
    gamma: np.ndarray
    eigenvalue_deviation: np.ndarray
    singular_deviation: np.ndarray
    normalized: np.ndarray
    spacing_normalized: np.ndarray

    @property
    def max_normalized(self) -> float:
        return float(np.max(self.normalized))

    def rows(self) -> list[tuple]:
        return [
            (i + 1, self.gamma[i], self.eigenvalue_deviation[i], self.singular_deviation[i], self.normalized[i])
            for i in range(self.gamma.size)
        ]


def rigidity_report(decomp: SampleDecomposition | ArrayLike, support: SupportStructure, N: int | None = None) -> RigidityReport:  # noqa: N803
    """|lambda_i - gamma_i^2|, |s_i - gamma_i| and N^{2/3} n_i^{1/3} |lambda_i - gamma_i^2| by rank.

    ``spacing_normalized`` divides the eigenvalue deviation by the local
    spacing of the gamma_i^2, a scale-free view of the same deviations.
    """
    if isinstance(decomp, SampleDecomposition):
        lam, n = decomp.sample_eigenvalues, decomp.N
    else:
        lam = np.asarray(decomp, dtype=float)
        if N is None:
            raise InputError("N is required when passing bare eigenvalues")
        n = int(N)
    gam = support.classical_locations
    k = gam.size
    lam = np.sort(lam)[::-1][:k]
    if lam.size != k:
        raise InputError("fewer eigenvalues than classical locations")
    g2 = gam * gam
    dev = np.abs(lam - g2)
    sdev = np.abs(np.sqrt(np.clip(lam, 0, None)) - gam)
    nn = support.distance_to_bulk_end()
    spacing = np.abs(np.gradient(g2)) if k > 1 else np.ones(1)
    return RigidityReport(gam, dev, sdev, n ** (2.0 / 3.0) * nn ** (1.0 / 3.0) * dev, dev / spacing)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


@dataclass
class SimulationReport:
    config: SimulationConfig
    records: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    scatter: dict[int, list[tuple]] = field(default_factory=dict)
    overlap_rows: dict[int, list[tuple]] = field(default_factory=dict)

    def records_for(self, n: int) -> list[dict[str, Any]]:
        return [r for r in self.records if r["N"] == n]

    def column(self, key: str, n: int | None = None) -> np.ndarray:
        rows = self.records if n is None else self.records_for(n)
        return np.array([r[key] for r in rows], dtype=float)

    def report_csv(self) -> str:
        if not self.records:
            return ""
        keys = list(self.records[0])
        return write_csv(None, keys, ([r[k] for k in keys] for r in self.records))

    def summary_json(self) -> str:
        return json.dumps(_jsonable(self.summary), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"cannot create output directory {out}: {exc.strerror}") from exc
        written = []

        def put(name: str, text: str) -> None:
            p = out / name
            try:
                p.write_text(text)
            except OSError as exc:
                raise InputError(f"cannot write {p}: {exc.strerror}") from exc
            written.append(p)

        put("report.csv", self.report_csv())
        put("summary.json", self.summary_json())
        for n, rows in sorted(self.scatter.items()):
            header = ["i", "lambda", "oracle_f", "algorithmic_f", "oracle_finv", "algorithmic_finv"]
            put(f"scatter_N{n}.csv", write_csv(None, header, rows))
            put(f"scatter_N{n}.svg", scatter_svg(rows, n))
        for n, rows in sorted(self.overlap_rows.items()):
            put(f"overlaps_N{n}.csv", write_overlap_csv(None, rows))
        return written


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def scatter_svg(rows: list[tuple], n: int, width: int = 640, height: int = 480) -> str:
    """Oracle (x) against algorithmic (y) Frobenius shrinkage, with the diagonal."""
    x = np.array([r[2] for r in rows], dtype=float)
    y = np.array([r[3] for r in rows], dtype=float)
    lo = float(min(x.min(), y.min()))
    hi = float(max(x.max(), y.max()))
    span = hi - lo if hi > lo else 1.0
    pad = 50

    def px(v: float) -> float:
        return pad + (v - lo) / span * (width - 2 * pad)

    def py(v: float) -> float:
        return height - pad - (v - lo) / span * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{px(lo):.2f}" y1="{py(lo):.2f}" x2="{px(hi):.2f}" y2="{py(hi):.2f}" stroke="gray" stroke-dasharray="4 4"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" font-size="14">oracle shrinkage (N={n})</text>',
        f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {height / 2:.0f})">algorithmic shrinkage</text>',
        f'<text x="{pad}" y="{height - pad + 16}" font-size="11">{lo:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 16}" font-size="11" text-anchor="end">{hi:.3g}</text>',
    ]
    for xi, yi in zip(x, y):
        parts.append(f'<circle cx="{px(xi):.2f}" cy="{py(yi):.2f}" r="1.5" fill="steelblue"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --------------------------------------------------------------------------
# studies
# --------------------------------------------------------------------------


def _map(fn, items: list, workers: int) -> list:
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def eta_regime(eta: float, n: int) -> str:
    lo, hi = n ** (-2.0 / 3.0 + 0.01), n ** (-0.01)
    if eta < lo:
        return "below_range"
    if eta > hi:
        return "above_range"
    return "in_range"


def _entrywise_one(config: SimulationConfig, n: int, rep: int, sp: PopulationSpectrum, support: SupportStructure, check_conservation: bool) -> tuple[dict[str, Any], list[tuple] | None]:
    y = generate_sample(sp, n, config.distribution, replication_rng(config.seed, n, rep))
    decomp = SampleDecomposition.from_eigh(y)
    eta = config.eta(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alg_f = shrink_frobenius(decomp, eta).shrunk_eigenvalues
        alg_i = shrink_inverse_frobenius(decomp, eta).shrunk_eigenvalues
    orc_f = oracle_shrinkage(decomp, sp.eigenvalues, LossKind.FROBENIUS).shrunk_eigenvalues
    orc_i = oracle_shrinkage(decomp, sp.eigenvalues, LossKind.INVERSE_FROBENIUS).shrunk_eigenvalues
    nn = support.distance_to_bulk_end()
    gap_f = np.abs(alg_f - orc_f)
    gap_i = np.abs(alg_i - orc_i)
    envelope = n ** (-1.0 / 6.0) * nn ** (-1.0 / 3.0)
    rig = rigidity_report(decomp, support)
    rec: dict[str, Any] = {
        "N": n,
        "replication": rep,
        "M": sp.M,
        "eta": eta,
        "max_gap_f": float(gap_f.max()),
        "max_gap_finv": float(gap_i.max()),
        "max_weighted_gap_f": float(np.max(nn ** (1.0 / 3.0) * gap_f)),
        "max_weighted_gap_finv": float(np.max(nn ** (1.0 / 3.0) * gap_i)),
        "max_normalized_gap_f": float(np.max(gap_f / envelope)),
        "max_normalized_gap_finv": float(np.max(gap_i / envelope)),
        "loss_f": eigenvalue_loss(alg_f, orc_f, LossKind.FROBENIUS),
        "loss_finv": eigenvalue_loss(alg_i, orc_i, LossKind.INVERSE_FROBENIUS),
        "operator_gap_f": float(gap_f.max()),
        "rigidity_max": rig.max_normalized,
        "rigidity_spacing_max": float(np.max(rig.spacing_normalized)),
        "inversions_f": int(np.sum(np.diff(alg_f) > 0)),
    }
    if check_conservation:
        a = assemble_estimator(decomp, alg_f)
        b = assemble_estimator(decomp, orc_f)
        rec["loss_f_matrix"] = loss(a, b, LossKind.FROBENIUS)
    scatter = None
    if rep == 0 and config.scatter:
        scatter = [
            (i + 1, decomp.sample_eigenvalues[i], orc_f[i], alg_f[i], orc_i[i], alg_i[i])
            for i in range(sp.M)
        ]
    return rec, scatter


def run_entrywise_study(config: SimulationConfig, *, check_conservation: bool = False) -> SimulationReport:
    """Oracle against algorithmic shrinkage for every (N, replication)."""
    report = SimulationReport(config)
    for n in config.n_grid:
        sp = config.population(n)
        support = find_support(sp)
        results = _map(
            lambda rep, n=n, sp=sp, support=support: _entrywise_one(config, n, rep, sp, support, check_conservation),
            list(range(config.replications)),
            config.workers,
        )
        for rec, scatter in results:
            report.records.append(rec)
            if scatter is not None:
                report.scatter[n] = scatter
        report.summary[str(n)] = _entrywise_summary(report, n, support)
    report.summary["config"] = config.to_dict()
    return report


def _entrywise_summary(report: SimulationReport, n: int, support: SupportStructure) -> dict[str, Any]:
    eta = report.config.eta(n)
    out = {
        "M": report.config.dimension(n),
        "eta": eta,
        "eta_regime": eta_regime(eta, n),
        "n_bulks": support.n_bulks,
        "edges": [float(e) for e in support.edges],
        "bulk_counts": [int(c) for c in support.bulk_counts],
    }
    for key in ("max_weighted_gap_f", "max_weighted_gap_finv", "loss_f", "loss_finv", "operator_gap_f", "rigidity_max"):
        out[f"median_{key}"] = float(np.median(report.column(key, n)))
    return out


def fit_slope(ns: ArrayLike, values: ArrayLike) -> float:
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def bootstrap_slope_se(ns: list[int], samples: list[np.ndarray], seed: int, draws: int = 200) -> float:
    """Standard error of the log-median slope, resampling replications within each N."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 7919])))
    slopes = np.empty(draws)
    for b in range(draws):
        meds = [np.median(s[rng.integers(0, s.size, s.size)]) for s in samples]
        slopes[b] = fit_slope(ns, meds)
    return float(np.std(slopes, ddof=1))


def run_rate_study(config: SimulationConfig) -> SimulationReport:
    """Entrywise study over the N grid plus log-median slope fits."""
    if len(config.n_grid) < 2:
        raise InputError("a rate study needs at least two sample sizes")
    report = run_entrywise_study(config)
    ns = list(config.n_grid)
    fits = {}
    for key in ("loss_f", "loss_finv", "operator_gap_f", "max_gap_finv"):
        samples = [report.column(key, n) for n in ns]
        meds = [float(np.median(s)) for s in samples]
        fits[key] = {
            "medians": meds,
            "slope": fit_slope(ns, meds),
            "slope_se": bootstrap_slope_se(ns, samples, config.seed),
        }
    regimes = {str(n): eta_regime(config.eta(n), n) for n in ns}
    report.summary["slopes"] = fits
    report.summary["eta_regimes"] = regimes
    report.summary["regime_flag"] = "ok" if all(r == "in_range" for r in regimes.values()) else "eta_outside_valid_range"
    return report


OBSERVABLES = ("identity", "sigma", "sigma_inv", "random")


def observable_diagonal(name: str, sp: PopulationSpectrum, rng: np.random.Generator | None = None) -> np.ndarray:
    if name == "identity":
        return np.ones(sp.M)
    if name == "sigma":
        return sp.eigenvalues.copy()
    if name == "sigma_inv":
        if np.any(sp.eigenvalues <= 0):
            raise InputError("sigma_inv needs a positive spectrum")
        return 1.0 / sp.eigenvalues
    if name == "random":
        if rng is None:
            raise InputError("random observable needs a generator")
        return rng.uniform(-1.0, 1.0, sp.M)
    raise InputError(f"unknown observable {name!r}; choose from {OBSERVABLES}")


def _overlap_one(config: SimulationConfig, n: int, rep: int, sp: PopulationSpectrum, support: SupportStructure, predicted: dict[str, np.ndarray], diags: dict[str, np.ndarray], slack: float) -> tuple[dict[str, Any], list[tuple]]:
    rng = replication_rng(config.seed, n, rep)
    y = generate_sample(sp, n, config.distribution, rng)
    dil = build_dilation(y)
    k_idx, i_idx = support.rank_in_bulk()
    nn = support.distance_to_bulk_end()
    env = (n * nn.astype(float) ** 2) ** (-1.0 / 6.0)
    bound = 10.0 * env * n**slack
    rec: dict[str, Any] = {"N": n, "replication": rep}
    rows: list[tuple] = []
    for name, diag in diags.items():
        emp = dil.u_overlaps(diag)[: env.size]
        err = np.abs(emp - predicted[name])
        rec[f"uu_{name}_coverage"] = float(np.mean(err <= bound))
        rec[f"uu_{name}_max_normalized"] = float(np.max(err / env))
        if rep == 0:
            rows.extend(
                (int(k_idx[t]) + 1, int(i_idx[t]), emp[t], predicted[name][t], env[t], err[t] / env[t])
                for t in range(env.size)
            )
    # D2: random diagonal with entries in [-1, 1]; D3: signed partial identity, norm 1
    d2 = rng.uniform(-1.0, 1.0, n)
    emp_v = dil.v_overlaps(d2)[: env.size]
    rec["vv_coverage"] = float(np.mean(np.abs(emp_v - np.mean(d2)) <= bound))
    d3 = np.zeros((sp.M, n))
    d3[np.arange(sp.M), np.arange(sp.M)] = rng.choice([-1.0, 1.0], sp.M)
    emp_uv = dil.uv_overlaps(d3)[: env.size]
    rec["uv_coverage"] = float(np.mean(np.abs(emp_uv) <= bound))
    return rec, rows


def run_overlap_study(config: SimulationConfig, observables: list[str] | None = None, slack: float = 0.1) -> SimulationReport:
    """Empirical against predicted <u_i, D1 u_i>, plus v-v and u-v overlaps, per replication."""
    names = list(observables or config.observables)
    report = SimulationReport(config)
    for n in config.n_grid:
        sp = config.population(n)
        support = find_support(sp)
        gam = support.classical_locations
        # observables get their own stream, disjoint from every replication index
        obs_rng = replication_rng(config.seed, n, 2**32 - 1)
        diags = {name: observable_diagonal(name, sp, obs_rng) for name in names}
        predicted = {name: np.real(predicted_overlap_uu(sp, gam, d)) for name, d in diags.items()}
        results = _map(
            lambda rep, n=n, sp=sp, support=support: _overlap_one(config, n, rep, sp, support, predicted, diags, slack),
            list(range(config.replications)),
            config.workers,
        )
        for rec, rows in results:
            report.records.append(rec)
            if rows:
                report.overlap_rows[n] = rows
        summ: dict[str, Any] = {"slack_exponent": slack, "multiplier": 10.0}
        for key in report.records_for(n)[0]:
            if key.endswith("coverage"):
                summ[f"min_{key}"] = float(np.min(report.column(key, n)))
        report.summary[str(n)] = summ
    report.summary["config"] = config.to_dict()
    return report


def run_study(config: SimulationConfig) -> SimulationReport:
    if config.study == "rate":
        return run_rate_study(config)
    if config.study == "overlap":
        return run_overlap_study(config)
    return run_entrywise_study(config)


__all__ = [
    "SimulationConfig",
    "SimulationReport",
    "RigidityReport",
    "generate_sample",
    "replication_rng",
    "rigidity_report",
    "run_entrywise_study",
    "run_rate_study",
    "run_overlap_study",
    "run_study",
    "fit_slope",
    "scatter_svg",
]
