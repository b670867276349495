"""Limiting spectral quantities of high-dimensional sample covariance matrices.

Convention: ``m_frak`` is the Stieltjes transform of the limiting spectral
distribution of the N x N Gram matrix Y^T Y / N.  When M < N that law has
an atom of mass 1 - M/N at zero, so its absolutely continuous part carries
mass M/N.  The M x M convention (the law of the eigenvalues of
Sigma_hat = Y Y^T / N, e.g. the textbook Marchenko-Pastur density) is
available through ``sample_stieltjes`` and ``eigenvalue_density``.

It solves

    z = f(m) = -1/m + (1/N) sum_i sigma_i / (1 + m sigma_i),   Im z Im m > 0,

and everything downstream works in the population eigenbasis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft, optimize

from .errors import (
    EdgeDetectionFailure,
    InputError,
    NonConvergence,
    QuadratureFailure,
    SingularPencil,
)
from .quadrature import gauss_kronrod

SOLVER_TOL = 1e-12
MAX_ITER = 500
ETA_FLOOR = 1e-9
EDGE_GRID = 2048
EDGE_TOL = 1e-12
QUANTILE_TOL = 1e-10

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]


# --------------------------------------------------------------------------
# population spectrum
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PopulationSpectrum:
    """Population eigenvalues sigma_1 >= ... >= sigma_M and sample size N.

    Repeated eigenvalues are grouped into (value, count) pairs on
    construction; all trace sums run over the grouped form.
    """

    eigenvalues: FloatArray
    sample_size: int
    tau: float = 1e-3
    values: FloatArray = field(init=False, repr=False)
    counts: NDArray[np.int64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        eig = np.asarray(self.eigenvalues, dtype=float).ravel()
        if eig.size == 0:
            raise InputError("population spectrum is empty")
        if not np.all(np.isfinite(eig)):
            raise InputError("population eigenvalues must be finite")
        if np.any(eig < 0):
            raise InputError("population eigenvalues must be nonnegative")
        n = int(self.sample_size)
        if n != self.sample_size or n <= 0:
            raise InputError("sample_size must be a positive integer")
        eig = np.sort(eig)[::-1].copy()
        eig.setflags(write=False)
        vals, counts = np.unique(eig, return_counts=True)
        vals, counts = vals[::-1].copy(), counts[::-1].copy()
        vals.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eig)
        object.__setattr__(self, "sample_size", n)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "counts", counts)
        if eig[0] > 1.0 / self.tau:
            warnings.warn(
                f"largest population eigenvalue {eig[0]:.4g} exceeds 1/tau", stacklevel=2
            )
        if np.mean(eig <= self.tau) > 1.0 - self.tau:
            warnings.warn("most population eigenvalues are below tau", stacklevel=2)

    @classmethod
    def from_weights(
        cls,
        values: ArrayLike,
        weights: ArrayLike,
        sample_size: int,
        dimension: int,
        tau: float = 1e-3,
    ) -> PopulationSpectrum:
        """Expand (value, fraction) pairs to ``dimension`` eigenvalues.

        Fractions are normalized; counts are assigned by largest remainder
        so they sum exactly to ``dimension``.
        """
        vals = np.asarray(values, dtype=float).ravel()
        wts = np.asarray(weights, dtype=float).ravel()
        if vals.shape != wts.shape or vals.size == 0:
            raise InputError("values and weights must be nonempty and of equal length")
        if np.any(wts < 0) or wts.sum() <= 0:
            raise InputError("weights must be nonnegative with positive sum")
        if dimension <= 0:
            raise InputError("dimension must be positive")
        raw = wts / wts.sum() * dimension
        counts = np.floor(raw).astype(int)
        short = dimension - counts.sum()
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
        return cls(np.repeat(vals, counts), sample_size, tau)

    @property
    def M(self) -> int:  # noqa: N802
        return int(self.eigenvalues.size)

    @property
    def N(self) -> int:  # noqa: N802
        return self.sample_size

    @property
    def ratio(self) -> float:
        return self.M / self.N

    @property
    def weights(self) -> FloatArray:
        """Counts divided by N, so (1/N) tr g(Sigma) = sum(weights * g(values))."""
        return self.counts / self.N

    def scaled(self, s: float) -> PopulationSpectrum:
        return PopulationSpectrum(self.eigenvalues * s, self.N, self.tau)

    def normalized_trace(self, g: ArrayLike) -> complex:
        """(1/N) sum_i g_i over the M (ungrouped) eigenvalues."""
        return complex(np.sum(np.asarray(g)) / self.N)


# --------------------------------------------------------------------------
# the self-consistent map
# --------------------------------------------------------------------------


def self_consistent_map(spectrum: PopulationSpectrum, m: ArrayLike) -> np.ndarray:
    """f(m) = -1/m + (1/N) sum sigma/(1 + m sigma), vectorized over m."""
    m = np.asarray(m)
    wv = spectrum.weights * spectrum.values
    return -1.0 / m + np.sum(wv / (1.0 + m[..., None] * spectrum.values), axis=-1)


def self_consistent_derivative(spectrum: PopulationSpectrum, m: ArrayLike) -> np.ndarray:
    """f'(m) = 1/m^2 - (1/N) sum sigma^2/(1 + m sigma)^2."""
    m = np.asarray(m)
    wv2 = spectrum.weights * spectrum.values**2
    return 1.0 / m**2 - np.sum(wv2 / (1.0 + m[..., None] * spectrum.values) ** 2, axis=-1)


def _tolerance(z: np.ndarray) -> np.ndarray:
    return SOLVER_TOL * np.maximum(1.0, np.abs(z))


def _newton(
    spectrum: PopulationSpectrum,
    z: np.ndarray,
    m: np.ndarray,
    max_iter: int,
    guard: bool = True,
    tol_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Damped Newton on f(m) - z, vectorized.  Returns (m, residual, converged).

    With ``guard`` set, iterates must stay in the upper half-plane (callers
    pass Im z > 0); steps are halved until the residual decreases.
    """
    m = m.astype(complex).copy()
    tol = _tolerance(z) * tol_scale
    res = np.abs(self_consistent_map(spectrum, m) - z)
    active = ~(res <= tol)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ma, za, ra = m[idx], z[idx], res[idx]
        step = (self_consistent_map(spectrum, ma) - za) / self_consistent_derivative(spectrum, ma)
        t = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        new_m, new_r = ma.copy(), ra.copy()
        for _ in range(40):
            pending = ~accepted
            if not pending.any():
                break
            cand = ma[pending] - t[pending] * step[pending]
            cres = np.abs(self_consistent_map(spectrum, cand) - za[pending])
            ok = np.isfinite(cres) & (cres < ra[pending])
            if guard:
                ok &= cand.imag > 0
            where = np.flatnonzero(pending)[ok]
            new_m[where], new_r[where] = cand[ok], cres[ok]
            accepted[where] = True
            t[pending] *= 0.5
        m[idx], res[idx] = new_m, new_r
        # stalled points (no decrease possible) stop iterating
        active[idx[~accepted]] = False
        active[idx] &= ~(res[idx] <= tol[idx])
    return m, res, res <= _tolerance(z)


def _fixed_point(
    spectrum: PopulationSpectrum, z: np.ndarray, m: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    wv = spectrum.weights * spectrum.values
    m = m.astype(complex).copy()
    for _ in range(max_iter):
        m = 1.0 / (-z + np.sum(wv / (1.0 + m[..., None] * spectrum.values), axis=-1))
    res = np.abs(self_consistent_map(spectrum, m) - z)
    return m, res, (res <= _tolerance(z)) & (m.imag > 0)


def _eta_ladder(eta_hi: float, eta_lo: float, factor: float = 0.25) -> np.ndarray:
    if eta_hi <= eta_lo:
        return np.array([eta_lo])
    n = int(math.ceil(math.log(eta_hi / eta_lo) / math.log(1.0 / factor)))
    return np.geomspace(eta_hi, eta_lo, n + 1)


def _scale(spectrum: PopulationSpectrum) -> float:
    return 1.0 + float(spectrum.values[0]) * (1.0 + math.sqrt(spectrum.ratio)) ** 2


def _homotopy(spectrum: PopulationSpectrum, x: np.ndarray, eta: np.ndarray | float) -> np.ndarray:
    """Follow m(x + i eta') from eta' = O(scale) down to ``eta`` with warm starts."""
    eta = np.broadcast_to(np.asarray(eta, dtype=float), x.shape)
    hi = max(_scale(spectrum), float(np.max(np.abs(x))) if x.size else 1.0)
    ladder = _eta_ladder(hi, float(eta.min()))
    z0 = x + 1j * np.maximum(ladder[0], eta)
    m, res, ok = _newton(spectrum, z0, -1.0 / z0, MAX_ITER)
    for level in ladder[1:]:
        zl = x + 1j * np.maximum(level, eta)
        m, res, ok = _newton(spectrum, zl, m, MAX_ITER)
    if not np.all(ok):
        bad = ~ok
        zl = x[bad] + 1j * eta[bad]
        mf, rf, okf = _fixed_point(spectrum, zl, m[bad], MAX_ITER)
        if not np.all(okf):
            worst = int(np.argmax(np.where(okf, 0, rf)))
            raise NonConvergence(
                f"self-consistent solve failed at z = {complex(zl[worst])}",
                residual=float(rf[worst]),
                guard="upper-half-plane sign guard and residual decrease",
            )
        m = m.copy()
        m[bad] = mf
    return m


def solve_stieltjes_array(spectrum: PopulationSpectrum, z: ArrayLike) -> ComplexArray:
    """Vectorized solver for z off the real axis; returns m_frak(z)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag == 0):
        raise InputError("solve_stieltjes needs Im z != 0; use boundary_stieltjes on the real axis")
    lower = z.imag < 0
    zu = np.where(lower, z.conj(), z)
    m, res, ok = _newton(spectrum, zu, -1.0 / zu, 60)
    if not np.all(ok):
        bad = np.flatnonzero(~ok)
        m[bad] = _homotopy(spectrum, zu[bad].real, zu[bad].imag)
    # conjugate symmetry is enforced by construction
    return np.where(lower, m.conj(), m)


@dataclass(frozen=True)
class StieltjesValue:
    """A solved point: z, m_frak(z), w = sqrt(z) and m(w) = w m_frak(w^2)."""

    z: complex
    m_frak: complex
    w: complex
    m: complex
    residual: float

    @property
    def eta(self) -> float:
        return abs(self.w.imag)


def _principal_sqrt(z: complex) -> complex:
    return complex(np.sqrt(complex(z)))


def solve_stieltjes(spectrum: PopulationSpectrum, z: complex) -> StieltjesValue:
    """Solve the self-consistent equation at a point with Im z != 0."""
    z = complex(z)
    mf = complex(solve_stieltjes_array(spectrum, z)[0])
    w = _principal_sqrt(z)
    res = float(abs(self_consistent_map(spectrum, mf) - z))
    return StieltjesValue(z=z, m_frak=mf, w=w, m=w * mf, residual=res)


def stieltjes_at_w(spectrum: PopulationSpectrum, w: complex) -> StieltjesValue:
    """m(w) for a square-root parameter w with Re w != 0 and Im w != 0."""
    w = complex(w)
    z = w * w
    if z.imag == 0:
        raise InputError("w must lie off both axes")
    mf = complex(solve_stieltjes_array(spectrum, z)[0])
    res = float(abs(self_consistent_map(spectrum, mf) - z))
    return StieltjesValue(z=z, m_frak=mf, w=w, m=w * mf, residual=res)


def boundary_stieltjes_array(spectrum: PopulationSpectrum, energies: ArrayLike) -> ComplexArray:
    """lim_{eta -> 0+} m_frak(E + i eta) for an array of E > 0.

    Solve at eta_floor and 2 eta_floor, Richardson-extrapolate, then polish
    with Newton directly on the real axis.  The polish is accepted only
    when it lands near the extrapolated value on an admissible root
    (complex with Im > 0, or real with f' > 0).
    """
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    if np.any(e <= 0):
        raise InputError("boundary values need E > 0")
    m2 = _homotopy(spectrum, e, 2.0 * ETA_FLOOR)
    m1, _, ok1 = _newton(spectrum, e + 1j * ETA_FLOOR, m2, MAX_ITER)
    if not np.all(ok1):
        m1 = _homotopy(spectrum, e, ETA_FLOOR)
    rich = 2.0 * m1 - m2
    # polish to rounding level: near edges f' is small and a 1e-12 residual
    # still leaves a visible error in Im m
    pol, _, ok = _newton(spectrum, e.astype(complex), rich, 60, guard=False, tol_scale=1e-6)
    close = np.abs(pol - rich) <= 1e-3 * (1.0 + np.abs(rich))
    real_root = np.abs(pol.imag) <= 1e-14 * (1.0 + np.abs(pol))
    increasing = np.real(self_consistent_derivative(spectrum, pol.real.astype(complex))) > 0
    admissible = np.where(real_root, increasing, pol.imag > 0)
    use = ok & close & admissible
    out = np.where(use, pol, rich)
    out = np.where(real_root & use, out.real + 0j, out)
    return out.real + 1j * np.maximum(out.imag, 0.0)


def boundary_stieltjes(spectrum: PopulationSpectrum, energy: float) -> StieltjesValue:
    e = float(energy)
    mf = complex(boundary_stieltjes_array(spectrum, e)[0])
    w = math.sqrt(e)
    res = float(abs(self_consistent_map(spectrum, mf) - e))
    return StieltjesValue(z=complex(e), m_frak=mf, w=complex(w), m=w * mf, residual=res)


def density(spectrum: PopulationSpectrum, energy: ArrayLike) -> np.ndarray | float:
    """Density (1/pi) Im m_frak(E) of the Gram-matrix law; 0 for E <= 0."""
    e = np.asarray(energy, dtype=float)
    flat = np.atleast_1d(e).ravel()
    out = np.zeros(flat.shape)
    pos = flat > 0
    if pos.any():
        out[pos] = boundary_stieltjes_array(spectrum, flat[pos]).imag / math.pi
    return float(out[0]) if e.ndim == 0 else out.reshape(e.shape)


def sample_stieltjes(spectrum: PopulationSpectrum, z: ArrayLike) -> ComplexArray:
    """Stieltjes transform of the eigenvalue law of the M x M matrix Sigma_hat."""
    z = np.asarray(z, dtype=complex)
    c = spectrum.ratio
    return (solve_stieltjes_array(spectrum, z).reshape(z.shape) + (1.0 - c) / z) / c


def eigenvalue_density(spectrum: PopulationSpectrum, energy: ArrayLike) -> np.ndarray | float:
    """Density of the eigenvalue law of Sigma_hat (M x M convention)."""
    return density(spectrum, energy) / spectrum.ratio


# --------------------------------------------------------------------------
# support edges, bulk counts and classical locations
# --------------------------------------------------------------------------


_PANEL_DEG = 32


@dataclass(frozen=True, eq=False)
class _BulkSeries:
    """Piecewise Chebyshev model of the mass distribution on one bulk [lo, hi].

    With x(theta) = c + r cos(theta), theta in [0, pi], the integrand
    g(theta) = density(x(theta)) r sin(theta) is smooth at both edges (the
    square-root vanishing is absorbed by sin).  Each panel carries the
    exact antiderivative of its interpolant.
    """

    lo: float
    hi: float
    breaks: FloatArray
    pieces: tuple
    antiderivatives: tuple
    offsets: FloatArray

    @property
    def total(self) -> float:
        return float(self.offsets[-1])

    def _panel(self, theta: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.breaks, theta, side="right") - 1, 0, len(self.pieces) - 1)

    def mass_above(self, theta: np.ndarray) -> np.ndarray:
        """Mass of [x(theta), hi]."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        idx = self._panel(theta)
        out = np.empty(theta.shape)
        for p in np.unique(idx):
            sel = idx == p
            out[sel] = self.offsets[p] + self.antiderivatives[p](theta[sel])
        return out

    def mass_slope(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        idx = self._panel(theta)
        out = np.empty(theta.shape)
        for p in np.unique(idx):
            sel = idx == p
            out[sel] = self.pieces[p](theta[sel])
        return out

    def x_of(self, theta: np.ndarray) -> np.ndarray:
        return 0.5 * (self.hi + self.lo) + 0.5 * (self.hi - self.lo) * np.cos(theta)


def _bulk_series(spectrum: PopulationSpectrum, lo: float, hi: float) -> _BulkSeries:
    c, r = 0.5 * (hi + lo), 0.5 * (hi - lo)
    ref = np.polynomial.chebyshev.chebpts1(_PANEL_DEG + 1)
    pending = [(k * math.pi / 8, (k + 1) * math.pi / 8) for k in range(8)]
    done: list[tuple[float, float, np.ndarray]] = []
    scale = None
    while pending:
        if len(done) + len(pending) > 4096:
            raise QuadratureFailure("mass model did not resolve the density")
        t0 = np.array([p[0] for p in pending])
        t1 = np.array([p[1] for p in pending])
        theta = 0.5 * (t0 + t1)[:, None] + 0.5 * (t1 - t0)[:, None] * ref[None, :]
        g = density(spectrum, c + r * np.cos(theta.ravel())).reshape(theta.shape) * r * np.sin(theta)
        coef = np.polynomial.chebyshev.chebfit(ref, g.T, _PANEL_DEG).T
        if scale is None:
            scale = float(np.max(np.abs(g)))
        tail = np.max(np.abs(coef[:, -3:]), axis=1) * (t1 - t0)
        nxt = []
        for j in range(len(pending)):
            if tail[j] <= 1e-15 * max(scale, 1e-300) or (t1[j] - t0[j]) < 1e-9:
                done.append((t0[j], t1[j], coef[j]))
            else:
                mid = 0.5 * (t0[j] + t1[j])
                nxt.extend([(t0[j], mid), (mid, t1[j])])
        pending = nxt
    done.sort(key=lambda p: p[0])
    pieces, antis, offsets = [], [], [0.0]
    for t0, t1, coef in done:
        piece = np.polynomial.Chebyshev(coef, domain=[t0, t1])
        anti = piece.integ(lbnd=t0)
        pieces.append(piece)
        antis.append(anti)
        offsets.append(offsets[-1] + float(anti(t1)))
    breaks = np.array([p[0] for p in done] + [math.pi])
    return _BulkSeries(lo, hi, breaks, tuple(pieces), tuple(antis), np.array(offsets))


@dataclass(frozen=True, eq=False)
class SupportStructure:
    """Edges a_1 >= ... >= a_2K, bulk counts N_k and classical locations.

    ``classical_locations`` are on the singular-value scale (gamma_i), and
    ``location_bulk`` holds the 0-based bulk index of each location.
    """

    edges: FloatArray
    bulk_masses: FloatArray
    bulk_counts: NDArray[np.int64]
    classical_locations: FloatArray
    location_bulk: NDArray[np.int64]
    critical_points: FloatArray

    @property
    def n_bulks(self) -> int:
        return int(self.bulk_counts.size)

    @property
    def bulks(self) -> list[tuple[float, float]]:
        """(lower, upper) edges of each bulk, largest bulk first."""
        e = self.edges
        return [(float(e[2 * k + 1]), float(e[2 * k])) for k in range(e.size // 2)]

    def rank_in_bulk(self) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """(k, i) labels with i the 1-based rank of each location inside its bulk."""
        k = self.location_bulk
        starts = np.concatenate([[0], np.cumsum(self.bulk_counts)[:-1]])
        i = np.arange(k.size) - starts[k] + 1
        return k, i

    def distance_to_bulk_end(self) -> NDArray[np.int64]:
        """n_{k,i} = min(i, N_k + 1 - i) per classical location."""
        k, i = self.rank_in_bulk()
        return np.minimum(i, self.bulk_counts[k] + 1 - i)

    def min_edge_gap(self) -> float:
        e = self.edges
        return float(np.min(-np.diff(e))) if e.size > 1 else float("inf")

    def distance_to_edges(self, z: complex) -> float:
        return float(np.min(np.abs(complex(z) - self.edges)))


def _intervals(spectrum: PopulationSpectrum) -> list[tuple[float, float]]:
    pos = spectrum.values[spectrum.values > 0]
    poles = np.sort(-1.0 / pos)  # ascending
    ivs: list[tuple[float, float]] = [(-math.inf, float(poles[0]))] if poles.size else [(-math.inf, 0.0)]
    for a, b in zip(poles[:-1], poles[1:]):
        ivs.append((float(a), float(b)))
    if poles.size:
        ivs.append((float(poles[-1]), 0.0))
    ivs.append((0.0, math.inf))
    return ivs


def _grid(a: float, b: float, n: int) -> np.ndarray:
    if math.isinf(a) and math.isinf(b):
        raise EdgeDetectionFailure("doubly infinite interval")
    if math.isinf(a):
        s = np.linspace(-30.0, 30.0, n)
        ref = max(abs(b), 1.0)
        return b - ref * np.exp(s)
    if math.isinf(b):
        s = np.linspace(-30.0, 30.0, n)
        ref = max(abs(a), 1.0)
        return a + ref * np.exp(s)
    u = (np.arange(n) + 0.5) / n
    return a + (b - a) * 0.5 * (1.0 - np.cos(math.pi * u))


def _slope_sign(spectrum: PopulationSpectrum, x: np.ndarray) -> np.ndarray:
    """Sign-carrying factor 1 - sum w (sigma x/(1+sigma x))^2 of x^2 f'(x)."""
    t = spectrum.values * x[..., None] / (1.0 + spectrum.values * x[..., None])
    return 1.0 - np.sum(spectrum.weights * t * t, axis=-1)


def _f_real(spectrum: PopulationSpectrum, x: float) -> float:
    return float(np.real(self_consistent_map(spectrum, complex(x))))


def _critical_points(spectrum: PopulationSpectrum) -> list[tuple[float, float, list[float]]]:
    """Per pole-free interval: (a, b, sorted critical points inside)."""
    out = []
    for a, b in _intervals(spectrum):
        x = _grid(a, b, EDGE_GRID)
        g = _slope_sign(spectrum, x)
        crit: list[float] = []
        for j in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
            lo, hi = float(x[j]), float(x[j + 1])
            lo, hi = min(lo, hi), max(lo, hi)
            root = optimize.brentq(
                lambda t: float(_slope_sign(spectrum, np.array(t))),
                lo,
                hi,
                xtol=EDGE_TOL * 1e-3,
                rtol=4 * np.finfo(float).eps,
                maxiter=500,
            )
            crit.append(root)
        out.append((a, b, sorted(crit)))
    return out


def _excluded_images(spectrum: PopulationSpectrum, crit_info) -> list[tuple[float, float]]:
    """Images f(J) of the increasing pieces J of f on the real line.

    A positive x lies outside the support iff it is such an image.
    """
    images = []
    for a, b, crit in crit_info:
        knots = [a, *crit, b]
        for lo, hi in zip(knots[:-1], knots[1:]):
            if math.isinf(lo) and math.isinf(hi):
                continue
            if math.isinf(lo):
                probe = hi - max(1.0, abs(hi))
            elif math.isinf(hi):
                probe = lo + max(1.0, abs(lo))
            else:
                probe = 0.5 * (lo + hi)
            if float(_slope_sign(spectrum, np.array(probe))) <= 0:
                continue

            def end_value(t: float, left: bool) -> float:
                if math.isinf(t):
                    return 0.0
                if t == 0.0:
                    return -math.inf if left else math.inf
                if t in crit:
                    return _f_real(spectrum, t)
                raise EdgeDetectionFailure("increasing piece ends at a pole")

            images.append((end_value(lo, True), end_value(hi, False)))
    return images


def support_edges(spectrum: PopulationSpectrum) -> tuple[FloatArray, FloatArray]:
    """Edges a_1 >= ... >= a_2K of supp rho within (0, inf) and the critical points."""
    crit_info = _critical_points(spectrum)
    images = sorted((lo, hi) for lo, hi in _excluded_images(spectrum, crit_info))
    merged: list[list[float]] = []
    for lo, hi in images:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    # complement of the merged images inside (0, inf)
    edges: list[float] = []
    cursor = 0.0
    for lo, hi in merged:
        if hi <= 0:
            continue
        lo = max(lo, 0.0)
        if lo > cursor:
            edges.extend([cursor, lo])
        cursor = max(cursor, hi)
    if not math.isinf(cursor):
        raise EdgeDetectionFailure("no upper edge found; the support appears unbounded")
    if not edges:
        raise EdgeDetectionFailure("empty support")
    crit = np.array([c for _, _, cs in crit_info for c in cs])
    return np.array(sorted(edges, reverse=True)), crit


def bulk_mass(spectrum: PopulationSpectrum, lo: float, hi: float) -> float:
    """Integral of the density over [lo, hi] with x = edge +/- t^2 at both ends."""
    mid = 0.5 * (lo + hi)

    def lower(t: np.ndarray) -> np.ndarray:
        return 2.0 * t * density(spectrum, lo + t * t)

    def upper(t: np.ndarray) -> np.ndarray:
        return 2.0 * t * density(spectrum, hi - t * t)

    tl = math.sqrt(mid - lo)
    a, _ = gauss_kronrod(lower, 0.0, tl, abs_tol=1e-13, rel_tol=1e-11)
    b, _ = gauss_kronrod(upper, 0.0, tl, abs_tol=1e-13, rel_tol=1e-11)
    return a + b


def find_support(spectrum: PopulationSpectrum, *, with_locations: bool = True) -> SupportStructure:
    """Edges, bulk counts and (optionally) classical locations."""
    edges, crit = support_edges(spectrum)
    n_bulk = edges.size // 2
    masses = np.empty(n_bulk)
    for k in range(n_bulk):
        masses[k] = bulk_mass(spectrum, float(edges[2 * k + 1]), float(edges[2 * k]))
    raw = masses * spectrum.N
    counts = np.rint(raw).astype(np.int64)
    if np.any(np.abs(raw - counts) > 1e-6):
        raise QuadratureFailure(f"bulk counts are not integral: {raw.tolist()}")
    if np.any(counts <= 0):
        raise QuadratureFailure(f"empty bulk detected: {raw.tolist()}")
    structure = SupportStructure(
        edges=edges,
        bulk_masses=masses,
        bulk_counts=counts,
        classical_locations=np.empty(0),
        location_bulk=np.empty(0, dtype=np.int64),
        critical_points=crit,
    )
    if not with_locations:
        return structure
    gam, bulk = _classical_locations(spectrum, structure)
    return SupportStructure(
        edges=edges,
        bulk_masses=masses,
        bulk_counts=counts,
        classical_locations=gam,
        location_bulk=bulk,
        critical_points=crit,
    )


def _invert_mass(series: _BulkSeries, targets: np.ndarray) -> np.ndarray:
    """Solve mass_above(theta) = target: interpolated start, safeguarded Newton."""
    if targets.size == 0:
        return targets
    grid = np.linspace(0.0, math.pi, 2049)
    f_grid = np.maximum.accumulate(series.mass_above(grid))
    theta = np.interp(targets, f_grid, grid)
    lo = grid[np.clip(np.searchsorted(f_grid, targets) - 1, 0, grid.size - 1)]
    hi = grid[np.clip(np.searchsorted(f_grid, targets), 0, grid.size - 1)]
    for _ in range(60):
        val = series.mass_above(theta)
        err = val - targets
        if np.max(np.abs(err)) <= 1e-14:
            break
        lo = np.where(err < 0, theta, lo)
        hi = np.where(err > 0, theta, hi)
        step = err / np.maximum(series.mass_slope(theta), 1e-300)
        cand = theta - step
        # fall back to bisection when Newton leaves the bracket
        theta = np.where((cand > lo) & (cand < hi), cand, 0.5 * (lo + hi))
    err = np.abs(series.mass_above(theta) - targets)
    if np.max(err) > QUANTILE_TOL:
        raise QuadratureFailure(f"quantile inversion missed by {np.max(err):.2e}")
    return theta


def _classical_locations(
    spectrum: PopulationSpectrum, structure: SupportStructure
) -> tuple[FloatArray, NDArray[np.int64]]:
    n_loc = min(spectrum.M, spectrum.N)
    targets = (np.arange(1, n_loc + 1) - 0.5) / spectrum.N
    gam_sq = np.empty(n_loc)
    bulk = np.empty(n_loc, dtype=np.int64)
    above = 0.0
    filled = np.zeros(n_loc, dtype=bool)
    for k, (lo, hi) in enumerate(structure.bulks):
        series = _bulk_series(spectrum, lo, hi)
        total = series.total
        sel = (~filled) & (targets < above + structure.bulk_counts[k] / spectrum.N)
        if k == structure.n_bulks - 1:
            sel = ~filled
        local = (targets[sel] - above) * (total / structure.bulk_masses[k])
        t_mid = _invert_mass(series, local)
        gam_sq[sel] = series.x_of(t_mid)
        bulk[sel] = k
        filled |= sel
        above += structure.bulk_masses[k]
    return np.sqrt(gam_sq), bulk


def classical_locations(
    spectrum: PopulationSpectrum, support: SupportStructure | None = None
) -> FloatArray:
    """gamma_1 >= ... >= gamma_{min(M,N)} with (i - 1/2)/N = rho([gamma_i^2, inf))."""
    if support is None:
        support = find_support(spectrum, with_locations=True)
        return support.classical_locations
    if support.classical_locations.size:
        return support.classical_locations
    gam, _ = _classical_locations(spectrum, support)
    return gam


def mass_above(spectrum: PopulationSpectrum, x: float, support: SupportStructure) -> float:
    """rho([x, inf)) by Gauss-Kronrod on the bulks, for forward checks."""
    total = 0.0
    for lo, hi in support.bulks:
        if x >= hi:
            continue
        if x <= lo:
            total += bulk_mass(spectrum, lo, hi)
            continue
        u = math.sqrt(hi - x)
        val, _ = gauss_kronrod(
            lambda t: 2.0 * t * density(spectrum, hi - t * t), 0.0, u, abs_tol=1e-14, rel_tol=1e-12
        )
        total += val
    return total


# --------------------------------------------------------------------------
# deterministic surrogate Gamma(w)
# --------------------------------------------------------------------------


def gamma_of_w(spectrum: PopulationSpectrum, w: complex, m: complex) -> ComplexArray:
    """Diagonal of Gamma(w) = -(w + m Sigma)^{-1}, one entry per population eigenvalue."""
    denom = complex(w) + complex(m) * spectrum.eigenvalues
    if np.min(np.abs(denom)) < 1e-12:
        raise SingularPencil("|w + m sigma_i| below 1e-12")
    return -1.0 / denom
