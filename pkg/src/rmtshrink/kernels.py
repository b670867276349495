"""Deterministic resolvent-kernel algebra on the dilation space C^{M+N}.

Observables are dense (M+N) x (M+N) matrices in the population eigenbasis;
the deterministic surrogate Pi(w) = diag(Gamma(w), m(w) I_N) is kept as its
diagonal.  The normalized trace <A> divides by N whatever the size of A.

Pairs and triples of spectral parameters are addressed by index into a
``KernelContext``; the conjugate of a parameter is obtained by conjugating
its Gamma and m, which is exact because Sigma is real.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InputError, NearSingularStability
from .spectral import (
    PopulationSpectrum,
    StieltjesValue,
    SupportStructure,
    gamma_of_w,
    self_consistent_derivative,
    solve_stieltjes_array,
    stieltjes_at_w,
)

BETA_FLOOR = 1e-14
CONJUGATION_PATTERNS = ("12", "1*2", "12*", "1*2*")


# --------------------------------------------------------------------------
# block observables
# --------------------------------------------------------------------------


class BlockObservable:
    """Dense (M+N) x (M+N) complex matrix with its M- and N-diagonal blocks tagged."""

    __slots__ = ("data", "M", "N")

    def __init__(self, data: ArrayLike, M: int) -> None:  # noqa: N803
        arr = np.asarray(data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InputError("block observable must be a square matrix")
        if not 0 < M < arr.shape[0]:
            raise InputError("block sizes inconsistent with the matrix dimension")
        self.data = arr
        self.M = int(M)
        self.N = arr.shape[0] - self.M

    # constructors -------------------------------------------------------

    @classmethod
    def from_diagonal(cls, top: ArrayLike, bottom: ArrayLike) -> BlockObservable:
        t = np.asarray(top, dtype=complex)
        b = np.asarray(bottom, dtype=complex)
        return cls(np.diag(np.concatenate([t, b])), t.size)

    @classmethod
    def from_blocks(
        cls,
        top: ArrayLike,
        bottom: ArrayLike,
        upper: ArrayLike | None = None,
        lower: ArrayLike | None = None,
    ) -> BlockObservable:
        t = np.asarray(top, dtype=complex)
        b = np.asarray(bottom, dtype=complex)
        M, N = t.shape[0], b.shape[0]  # noqa: N806
        out = np.zeros((M + N, M + N), dtype=complex)
        out[:M, :M] = t
        out[M:, M:] = b
        if upper is not None:
            out[:M, M:] = upper
        if lower is not None:
            out[M:, :M] = lower
        return cls(out, M)

    @classmethod
    def zeros(cls, M: int, N: int) -> BlockObservable:  # noqa: N803
        return cls(np.zeros((M + N, M + N), dtype=complex), M)

    @classmethod
    def identity_m(cls, M: int, N: int) -> BlockObservable:  # noqa: N803
        return cls.from_diagonal(np.ones(M), np.zeros(N))

    @classmethod
    def identity_n(cls, M: int, N: int) -> BlockObservable:  # noqa: N803
        return cls.from_diagonal(np.zeros(M), np.ones(N))

    @classmethod
    def identity_plus(cls, M: int, N: int) -> BlockObservable:  # noqa: N803
        return cls.from_diagonal(np.ones(M), np.ones(N))

    @classmethod
    def identity_minus(cls, M: int, N: int) -> BlockObservable:  # noqa: N803
        return cls.from_diagonal(np.ones(M), -np.ones(N))

    @classmethod
    def sigma_m(cls, spectrum: PopulationSpectrum) -> BlockObservable:
        return cls.from_diagonal(spectrum.eigenvalues, np.zeros(spectrum.N))

    @classmethod
    def sigma_plus(cls, spectrum: PopulationSpectrum) -> BlockObservable:
        return cls.from_diagonal(spectrum.eigenvalues, np.ones(spectrum.N))

    @classmethod
    def sigma_minus(cls, spectrum: PopulationSpectrum) -> BlockObservable:
        return cls.from_diagonal(spectrum.eigenvalues, -np.ones(spectrum.N))

    # blocks and scalars -------------------------------------------------

    @property
    def top(self) -> np.ndarray:
        """A_M, the top-left M x M block."""
        return self.data[: self.M, : self.M]

    @property
    def bottom(self) -> np.ndarray:
        """A_N, the bottom-right N x N block."""
        return self.data[self.M :, self.M :]

    def trace(self) -> complex:
        """Normalized trace tr(A)/N."""
        return complex(np.trace(self.data) / self.N)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data, 2))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data)))

    def transpose(self) -> BlockObservable:
        return BlockObservable(self.data.T, self.M)

    def conj(self) -> BlockObservable:
        return BlockObservable(self.data.conj(), self.M)

    def adjoint(self) -> BlockObservable:
        return BlockObservable(self.data.conj().T, self.M)

    def scale_rows_cols(self, left: np.ndarray, right: np.ndarray) -> BlockObservable:
        """diag(left) A diag(right)."""
        return BlockObservable(left[:, None] * self.data * right[None, :], self.M)

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other: object) -> np.ndarray:
        if isinstance(other, BlockObservable):
            if other.M != self.M or other.N != self.N:
                raise InputError("block shapes differ")
            return other.data
        return np.asarray(other)

    def __add__(self, other: object) -> BlockObservable:
        return BlockObservable(self.data + self._coerce(other), self.M)

    def __sub__(self, other: object) -> BlockObservable:
        return BlockObservable(self.data - self._coerce(other), self.M)

    def __neg__(self) -> BlockObservable:
        return BlockObservable(-self.data, self.M)

    def __mul__(self, scalar: complex) -> BlockObservable:
        return BlockObservable(self.data * complex(scalar), self.M)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> BlockObservable:
        return BlockObservable(self.data / complex(scalar), self.M)

    def __matmul__(self, other: BlockObservable) -> BlockObservable:
        return BlockObservable(self.data @ self._coerce(other), self.M)

    def __repr__(self) -> str:
        return f"BlockObservable(M={self.M}, N={self.N})"


# --------------------------------------------------------------------------
# spectral parameter bookkeeping
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralPoint:
    """One parameter w with m(w), m_frak(w^2) and the diagonal of Gamma(w)."""

    w: complex
    m: complex
    m_frak: complex
    gamma: NDArray[np.complex128]

    @property
    def z(self) -> complex:
        return self.w * self.w

    @property
    def sign(self) -> int:
        return 1 if self.w.imag > 0 else -1

    def conj(self) -> SpectralPoint:
        return SpectralPoint(self.w.conjugate(), self.m.conjugate(), self.m_frak.conjugate(), self.gamma.conj())

    def pi_diagonal(self, N: int) -> np.ndarray:  # noqa: N803
        return np.concatenate([self.gamma, np.full(N, self.m)])


def spectral_point(spectrum: PopulationSpectrum, w: complex | StieltjesValue) -> SpectralPoint:
    sv = w if isinstance(w, StieltjesValue) else stieltjes_at_w(spectrum, w)
    return SpectralPoint(complex(sv.w), complex(sv.m), complex(sv.m_frak), gamma_of_w(spectrum, sv.w, sv.m))


@dataclass(frozen=True, eq=False)
class KernelContext:
    """Two or three spectral parameters on one population spectrum."""

    spectrum: PopulationSpectrum
    points: tuple[SpectralPoint, ...]
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, spectrum: PopulationSpectrum, ws: list[complex]) -> KernelContext:
        if not 1 <= len(ws) <= 3:
            raise InputError("a kernel context holds one to three spectral parameters")
        return cls(spectrum, tuple(spectral_point(spectrum, w) for w in ws))

    @property
    def M(self) -> int:  # noqa: N802
        return self.spectrum.M

    @property
    def N(self) -> int:  # noqa: N802
        return self.spectrum.N

    def point(self, k: int) -> SpectralPoint:
        return self.points[k]

    def pi(self, k: int) -> np.ndarray:
        return self.points[k].pi_diagonal(self.N)

    def t(self, i: int, j: int) -> complex:
        """t_ij = <Gamma_i Sigma Gamma_j Sigma>."""
        return t_param(self.spectrum, self.points[i], self.points[j])

    def b(self, i: int, j: int) -> complex:
        return self.points[i].m * self.points[j].m

    def beta(self, i: int, j: int) -> float:
        return beta_param(self.spectrum, self.points[i], self.points[j])

    def with_t_perturbation(self, delta: complex) -> KernelContext:
        """Copy whose t-parameters are shifted by ``delta`` (fault injection for verification)."""
        ctx = KernelContext(self.spectrum, self.points)
        ctx._cache["t_shift"] = complex(delta)
        return ctx

    def _t_shift(self) -> complex:
        return self._cache.get("t_shift", 0.0)


def t_param(spectrum: PopulationSpectrum, p1: SpectralPoint, p2: SpectralPoint) -> complex:
    s = spectrum.eigenvalues
    return complex(np.sum(p1.gamma * s * p2.gamma * s) / spectrum.N)


def beta_param(spectrum: PopulationSpectrum, p1: SpectralPoint, p2: SpectralPoint) -> float:
    """beta(w1, w2) = |1 - t_12 b_12|."""
    return abs(1.0 - t_param(spectrum, p1, p2) * p1.m * p2.m)


# --------------------------------------------------------------------------
# S operators, stability operator and its dual inverse
# --------------------------------------------------------------------------


def s_diag(A: BlockObservable, spectrum: PopulationSpectrum) -> BlockObservable:  # noqa: N803
    """S_d[A] = <A I_N> Sigma_M + <A Sigma_M> I_N."""
    n = spectrum.N
    tr_n = np.trace(A.bottom) / n
    tr_s = np.sum(np.diag(A.top) * spectrum.eigenvalues) / n
    return BlockObservable.from_diagonal(tr_n * spectrum.eigenvalues, np.full(n, tr_s))


def s_offdiag(A: BlockObservable, spectrum: PopulationSpectrum) -> BlockObservable:  # noqa: N803
    """S_o[A] = (1/N)(Sigma_M A^T I_N + I_N A^T Sigma_M)."""
    M, n = spectrum.M, spectrum.N  # noqa: N806
    at = A.data.T
    out = np.zeros_like(A.data)
    s = spectrum.eigenvalues
    out[:M, M:] = s[:, None] * at[:M, M:]
    out[M:, :M] = at[M:, :M] * s[None, :]
    return BlockObservable(out / n, M)


def apply_b12(ctx: KernelContext, A: BlockObservable, i: int = 0, j: int = 1) -> BlockObservable:  # noqa: N803
    """B_ij[A] = A - Pi_i S_d[A] Pi_j."""
    return A - s_diag(A, ctx.spectrum).scale_rows_cols(ctx.pi(i), ctx.pi(j))


def x12_defining_map(ctx: KernelContext, V: BlockObservable, i: int = 0, j: int = 1) -> BlockObservable:  # noqa: N803
    """The map V -> V - S_d[Pi_i V Pi_j]; X_ij is its inverse."""
    return V - s_diag(V.scale_rows_cols(ctx.pi(i), ctx.pi(j)), ctx.spectrum)


def apply_x12(ctx: KernelContext, A: BlockObservable, i: int = 0, j: int = 1) -> BlockObservable:  # noqa: N803
    """X_ij[A] = A - <A_N> I_N + (<Gamma_i A_M Gamma_j Sigma> + <A_N>)/(1 - t b) (b Sigma_M + I_N)."""
    sp = ctx.spectrum
    pi_, pj = ctx.points[i], ctx.points[j]
    t = ctx.t(i, j) + ctx._t_shift()
    b = pi_.m * pj.m
    denom = 1.0 - t * b
    if abs(denom) < BETA_FLOOR:
        raise NearSingularStability(f"beta = {abs(denom):.3e} below {BETA_FLOOR}")
    x = np.sum(pi_.gamma * np.diag(A.top) * pj.gamma * sp.eigenvalues) / sp.N
    a = np.trace(A.bottom) / sp.N
    coef = (x + a) / denom
    top = coef * b * sp.eigenvalues
    bottom = np.full(sp.N, coef - a)
    return A + BlockObservable.from_diagonal(top, bottom)


def pi_12(ctx: KernelContext, A: BlockObservable, i: int = 0, j: int = 1) -> BlockObservable:  # noqa: N803
    """Pi_ij(A) = Pi_i X_ij[A] Pi_j."""
    return apply_x12(ctx, A, i, j).scale_rows_cols(ctx.pi(i), ctx.pi(j))


def pi_123(
    ctx: KernelContext,
    A1: BlockObservable,  # noqa: N803
    A2: BlockObservable,  # noqa: N803
    i: int = 0,
    j: int = 1,
    k: int = 2,
) -> BlockObservable:
    """Pi_ijk(A1, A2) = Pi_ik(V1 Pi_j V2) with V1 = X_ij[A1], V2 = X_jk[A2]."""
    v1 = apply_x12(ctx, A1, i, j)
    v2 = apply_x12(ctx, A2, j, k)
    middle = v1.scale_rows_cols(np.ones(v1.data.shape[0]), ctx.pi(j)) @ v2
    return pi_12(ctx, middle, i, k)


# --------------------------------------------------------------------------
# divided differences and t
# --------------------------------------------------------------------------


def divided_difference(spectrum: PopulationSpectrum, z1: complex, z2: complex) -> complex:
    """m_frak[z1, z2]; the diagonal case uses a centered difference with h = 1e-6 |z|."""
    z1, z2 = complex(z1), complex(z2)
    if z1 == z2:
        h = 1e-6 * abs(z1)
        mp, mm = solve_stieltjes_array(spectrum, [z1 + h, z1 - h])
        return complex((mp - mm) / (2 * h))
    m1, m2 = solve_stieltjes_array(spectrum, [z1, z2])
    return complex((m1 - m2) / (z1 - z2))


def stieltjes_derivative(spectrum: PopulationSpectrum, z: complex) -> complex:
    """m_frak'(z) = 1 / f'(m_frak(z)), from implicit differentiation."""
    m = solve_stieltjes_array(spectrum, z)[0]
    return complex(1.0 / self_consistent_derivative(spectrum, m))


def divided_difference_algebraic(spectrum: PopulationSpectrum, z1: complex, z2: complex) -> complex:
    """m_frak[z1, z2] from (z1 - z2)/(m1 - m2) = 1/(m1 m2) - (1/N) tr Sigma^2/((1+m1 Sigma)(1+m2 Sigma))."""
    m1, m2 = solve_stieltjes_array(spectrum, [complex(z1), complex(z2)])
    v, wt = spectrum.values, spectrum.weights
    inv = 1.0 / (m1 * m2) - np.sum(wt * v * v / ((1.0 + m1 * v) * (1.0 + m2 * v)))
    return complex(1.0 / inv)


def t_closed_form(ctx: KernelContext, i: int = 0, j: int = 1) -> complex:
    """(1/(w_i w_j)) (1/(m_frak_i m_frak_j) - 1/m_frak[z_i, z_j])."""
    pi_, pj = ctx.points[i], ctx.points[j]
    if pi_.z == pj.z:
        dd = 1.0 / complex(self_consistent_derivative(ctx.spectrum, pi_.m_frak))
    else:
        dd = (pi_.m_frak - pj.m_frak) / (pi_.z - pj.z)
    return (1.0 / (pi_.w * pj.w)) * (1.0 / (pi_.m_frak * pj.m_frak) - 1.0 / dd)


# --------------------------------------------------------------------------
# regularity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RegularityReport:
    regular: bool
    norm: float
    trace_n: complex
    ratios: dict[str, float]
    betas: dict[str, float]
    multiplier: float

    @property
    def worst_ratio(self) -> float:
        return max(self.ratios.values())

    def __bool__(self) -> bool:
        return self.regular


def _pattern_points(ctx: KernelContext, i: int, j: int) -> dict[str, tuple[SpectralPoint, SpectralPoint]]:
    p1, p2 = ctx.points[i], ctx.points[j]
    return {
        "12": (p1, p2),
        "1*2": (p1.conj(), p2),
        "12*": (p1, p2.conj()),
        "1*2*": (p1.conj(), p2.conj()),
    }


def gamma_sandwich(spectrum: PopulationSpectrum, p1: SpectralPoint, A: BlockObservable, p2: SpectralPoint) -> complex:  # noqa: N803
    """<Gamma(w1) A_M Gamma(w2) Sigma>."""
    return complex(np.sum(p1.gamma * np.diag(A.top) * p2.gamma * spectrum.eigenvalues) / spectrum.N)


def is_regular(
    ctx: KernelContext,
    A: BlockObservable,  # noqa: N803
    multiplier: float = 10.0,
    i: int = 0,
    j: int = 1,
    trace_tol: float = 1e-10,
) -> RegularityReport:
    """Check ||A|| <= mult, <A_N> = 0 and the four conjugation-pattern bounds."""
    sp = ctx.spectrum
    norm = A.norm()
    tr_n = complex(np.trace(A.bottom) / sp.N)
    ratios, betas = {}, {}
    for name, (q1, q2) in _pattern_points(ctx, i, j).items():
        beta = beta_param(sp, q1, q2)
        betas[name] = beta
        ratios[name] = abs(gamma_sandwich(sp, q1, A, q2)) / beta
    ok = (
        norm <= multiplier
        and abs(tr_n) <= trace_tol * max(1.0, norm)
        and all(r <= multiplier for r in ratios.values())
    )
    return RegularityReport(ok, norm, tr_n, ratios, betas, multiplier)


# --------------------------------------------------------------------------
# regularizations
# --------------------------------------------------------------------------


def one_point_regularize(
    spectrum: PopulationSpectrum, w: complex | SpectralPoint, D: BlockObservable  # noqa: N803
) -> tuple[BlockObservable, complex, complex]:
    """(D)o_w = D - (<Im Gamma D_M>/<Im Gamma>) I_M - <D_N> I_N, and theta^+-."""
    p = w if isinstance(w, SpectralPoint) else spectral_point(spectrum, w)
    im_g = p.gamma.imag
    ratio = complex(np.sum(im_g * np.diag(D.top)) / np.sum(im_g))
    tr_n = complex(np.trace(D.bottom) / spectrum.N)
    out = D - BlockObservable.from_diagonal(np.full(spectrum.M, ratio), np.full(spectrum.N, tr_n))
    return out, 0.5 * (ratio + tr_n), 0.5 * (ratio - tr_n)


def one_point_pre_regularize(
    spectrum: PopulationSpectrum, w: complex | SpectralPoint, D: BlockObservable  # noqa: N803
) -> tuple[BlockObservable, complex, complex]:
    """Sigma-weighted centering: ratio <Im Gamma Sigma D_M>/<Im Gamma Sigma>, and varsigma^+-."""
    p = w if isinstance(w, SpectralPoint) else spectral_point(spectrum, w)
    weight = p.gamma.imag * spectrum.eigenvalues
    ratio = complex(np.sum(weight * np.diag(D.top)) / np.sum(weight))
    tr_n = complex(np.trace(D.bottom) / spectrum.N)
    out = D - BlockObservable.from_diagonal(np.full(spectrum.M, ratio), np.full(spectrum.N, tr_n))
    return out, 0.5 * (ratio + tr_n), 0.5 * (ratio - tr_n)


def default_tau_prime(support: SupportStructure) -> float:
    """Half the smallest gap between consecutive edges of the symmetrized law.

    Parameters w live on the square-root scale, so the edges are
    +-sqrt(a_k); the gap across the origin is 2 sqrt(a_2K).
    """
    roots = np.sqrt(np.asarray(support.edges, dtype=float))
    edges = np.unique(np.concatenate([roots, -roots]))
    gaps = np.diff(edges)
    gaps = gaps[gaps > 0]
    return 0.5 * float(gaps.min()) if gaps.size else float("inf")


def two_point_coefficient(
    ctx: KernelContext,
    support: SupportStructure,
    tau_prime: float | None = None,
    i: int = 0,
    j: int = 1,
) -> complex:
    """vartheta_{w_i, w_j}(Sigma_M); the order of the two parameters matters."""
    tp = default_tau_prime(support) if tau_prime is None else tau_prime
    p1, p2 = ctx.points[i], ctx.points[j]
    if abs(p1.w - p2.w) > tp:
        return 0.0j
    if p1.sign == p2.sign:
        d1 = support.distance_to_edges(p1.z)
        d2 = support.distance_to_edges(p2.z)
        core = 1.0 / (p1.m.conjugate() * p2.m) if d1 >= d2 else 1.0 / (p1.m * p2.m.conjugate())
    else:
        core = ctx.t(i, j)
    return (p2.w / p1.w) * core


def two_point_regularize_sigma(
    ctx: KernelContext,
    support: SupportStructure,
    tau_prime: float | None = None,
    i: int = 0,
    j: int = 1,
) -> tuple[BlockObservable, complex]:
    """(Sigma_M)o_{w_i, w_j} = Sigma_M - vartheta I_M."""
    theta = two_point_coefficient(ctx, support, tau_prime, i, j)
    sp = ctx.spectrum
    out = BlockObservable.from_diagonal(sp.eigenvalues - theta, np.zeros(sp.N))
    return out, theta


def xi_matrices(ctx: KernelContext, i: int = 0, j: int = 1) -> tuple[BlockObservable, BlockObservable]:
    """Explicit Xi^+ and Xi^- for the pair (w_i, w_j)."""
    p1, p2 = ctx.points[i], ctx.points[j]
    s, n = ctx.spectrum.eigenvalues, ctx.N
    xp = BlockObservable.from_diagonal(-p2.w - (p1.m + p2.m) * s, np.full(n, p1.w + 1 / p1.m + 1 / p2.m))
    xm = BlockObservable.from_diagonal(-p2.w + (p1.m - p2.m) * s, np.full(n, p1.w + 1 / p1.m - 1 / p2.m))
    return xp, xm


def xi_defining(ctx: KernelContext, i: int = 0, j: int = 1) -> tuple[BlockObservable, BlockObservable]:
    """Xi^+- = Pi_j^{-1} I^+- - S_d[Pi_i I^+-]."""
    M, N = ctx.M, ctx.N  # noqa: N806
    out = []
    for ipm in (BlockObservable.identity_plus(M, N), BlockObservable.identity_minus(M, N)):
        left = ipm.scale_rows_cols(1.0 / ctx.pi(j), np.ones(M + N))
        right = s_diag(ipm.scale_rows_cols(ctx.pi(i), np.ones(M + N)), ctx.spectrum)
        out.append(left - right)
    return out[0], out[1]


def xi_regularized(
    ctx: KernelContext,
    support: SupportStructure,
    tau_prime: float | None = None,
    i: int = 0,
    j: int = 1,
) -> tuple[BlockObservable, BlockObservable]:
    """(Xi^+-)o = (-+m_i - m_j) (Sigma_M)o.

    The factor is the Sigma coefficient of Xi^+-, so Xi^+- minus its
    regularization lies in span{I_M, I_N}.
    """
    sig, _ = two_point_regularize_sigma(ctx, support, tau_prime, i, j)
    p1, p2 = ctx.points[i], ctx.points[j]
    return sig * (-p1.m - p2.m), sig * (p1.m - p2.m)


# --------------------------------------------------------------------------
# matrix Dyson equation
# --------------------------------------------------------------------------


def mde_residual(spectrum: PopulationSpectrum, w: complex, m: complex) -> float:
    """max-entry norm of I + w Pi + S_d[Pi] Pi for Pi built from (w, m)."""
    w, m = complex(w), complex(m)
    s = spectrum.eigenvalues
    gamma = gamma_of_w(spectrum, w, m)
    g_sigma = np.sum(gamma * s) / spectrum.N
    top = 1.0 + w * gamma + m * s * gamma
    bottom = 1.0 + w * m + g_sigma * m
    return float(max(np.max(np.abs(top)), abs(bottom)))


def scalar_equation_residual(spectrum: PopulationSpectrum, w: complex, m: complex) -> float:
    """|w + 1/m - (1/N) tr Sigma/(w + m Sigma)|."""
    v, wt = spectrum.values, spectrum.weights
    return float(abs(w + 1.0 / m - np.sum(wt * v / (w + m * v))))


# --------------------------------------------------------------------------
# dilation resolvent (Monte Carlo oracle)
# --------------------------------------------------------------------------


class DilationResolvent:
    """G(w) = (H - w)^{-1} for H = [[0, Y], [Y^T, 0]] / sqrt(N), via one eigendecomposition."""

    def __init__(self, Y: np.ndarray) -> None:  # noqa: N803
        Y = np.asarray(Y, dtype=float)  # noqa: N806
        self.M, self.N = Y.shape
        h = np.zeros((self.M + self.N, self.M + self.N))
        h[: self.M, self.M :] = Y / np.sqrt(self.N)
        h[self.M :, : self.M] = h[: self.M, self.M :].T
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(h)

    def resolvent(self, w: complex) -> np.ndarray:
        u = self.eigenvectors
        return (u / (self.eigenvalues - w)) @ u.T

    def average(self, w: complex, A: BlockObservable) -> complex:  # noqa: N803
        """<G(w) A> with divisor N."""
        return complex(np.trace(self.resolvent(w) @ A.data) / self.N)

    def chain(self, w1: complex, A: BlockObservable, w2: complex) -> np.ndarray:  # noqa: N803
        return self.resolvent(w1) @ A.data @ self.resolvent(w2)
