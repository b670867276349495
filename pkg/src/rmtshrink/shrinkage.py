"""Nonlinear shrinkage of sample covariance eigenvalues.

Three families of shrunk eigenvalues are provided for the Frobenius and
inverse-Frobenius losses:

* oracle: quadratic forms of the sample eigenvectors against the
  (unknown) population covariance;
* transitional: the deterministic limit of the oracle, computed from the
  known population spectrum through the real-axis Stieltjes transform;
* algorithmic: the transitional formula with the Stieltjes transform
  replaced by its empirical counterpart evaluated slightly off the real
  axis at z_i = lambda_i (1 + i eta).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateSpectrum, DenominatorNearZero, InputError, NonInvertible, NonSPD, PoleHit
from .spectral import PopulationSpectrum, boundary_stieltjes_array

POLE_TOL = 1e-14
DEGENERACY_TOL = 1e-12
DENOMINATOR_TOL = 1e-10


class LossKind(str, enum.Enum):
    FROBENIUS = "frobenius"
    INVERSE_FROBENIUS = "inverse_frobenius"

    @classmethod
    def parse(cls, value: str | LossKind) -> LossKind:
        if isinstance(value, LossKind):
            return value
        key = str(value).strip().lower()
        aliases = {"f": cls.FROBENIUS, "frobenius": cls.FROBENIUS, "finv": cls.INVERSE_FROBENIUS,
                   "inverse_frobenius": cls.INVERSE_FROBENIUS}
        if key not in aliases:
            raise InputError(f"unknown loss kind {value!r} (expected f or finv)")
        return aliases[key]


class Mode(str, enum.Enum):
    ORACLE = "oracle"
    TRANSITIONAL = "transitional"
    ALGORITHMIC = "algorithmic"


# --------------------------------------------------------------------------
# sample decomposition
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleDecomposition:
    """Sample eigenvalues lambda_1 >= ... >= lambda_M with eigenvectors u_i.

    ``singular_values`` are sqrt(lambda_i); ``right_singular_vectors`` holds
    v_i for i <= min(M, N) when the decomposition came from an SVD.
    """

    sample_eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]
    singular_values: NDArray[np.float64]
    right_singular_vectors: NDArray[np.float64] | None
    M: int
    N: int

    @classmethod
    def from_eigh(cls, Y: ArrayLike) -> SampleDecomposition:  # noqa: N803
        """Symmetric eigensolver on Sigma_hat = Y Y^T / N (estimator path)."""
        y = _as_data(Y)
        m, n = y.shape
        cov = (y @ y.T) / n
        lam, u = np.linalg.eigh(0.5 * (cov + cov.T))
        # stable sort keeps the eigensolver order within ties
        order = np.argsort(-lam, kind="stable")
        lam = np.clip(lam[order], 0.0, None)
        u = u[:, order]
        s = np.sqrt(lam)
        # lambda_i = s_i^2 exactly
        return cls(s * s, u, s, None, m, n)

    @classmethod
    def from_svd(cls, Y: ArrayLike) -> SampleDecomposition:  # noqa: N803
        """SVD of Y / sqrt(N), keeping right singular vectors (overlap path)."""
        y = _as_data(Y)
        m, n = y.shape
        u, s, vt = np.linalg.svd(y / np.sqrt(n), full_matrices=True)
        k = min(m, n)
        s_full = np.zeros(m)
        s_full[:k] = s
        lam = s_full**2
        return cls(lam, u, s_full, vt[:k].T.copy(), m, n)

    @classmethod
    def from_covariance(cls, cov: ArrayLike, N: int) -> SampleDecomposition:  # noqa: N803
        c = np.asarray(cov, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InputError("covariance must be square")
        lam, u = np.linalg.eigh(0.5 * (c + c.T))
        order = np.argsort(-lam, kind="stable")
        s = np.sqrt(np.clip(lam[order], 0.0, None))
        return cls(s * s, u[:, order], s, None, c.shape[0], int(N))

    @property
    def ratio(self) -> float:
        return self.M / self.N

    def orthonormality_error(self) -> float:
        u = self.eigenvectors
        return float(np.max(np.abs(u.T @ u - np.eye(u.shape[1]))))


def _as_data(Y: ArrayLike) -> np.ndarray:  # noqa: N803
    y = np.asarray(Y, dtype=float)
    if y.ndim != 2 or min(y.shape) == 0:
        raise InputError("data matrix must be two-dimensional and nonempty")
    if not np.all(np.isfinite(y)):
        raise InputError("data matrix contains non-finite entries")
    return y


# --------------------------------------------------------------------------
# shrinkage results
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShrinkageResult:
    loss_kind: LossKind
    mode: Mode
    shrunk_eigenvalues: NDArray[np.float64]
    eta: float | None = None
    per_eigenvalue_z: NDArray[np.complex128] | None = None

    @property
    def nonpositive(self) -> NDArray[np.int64]:
        """Indices whose shrunk value is not strictly positive."""
        return np.flatnonzero(~(self.shrunk_eigenvalues > 0))

    @property
    def inversions(self) -> NDArray[np.int64]:
        """Indices i with shrunk_i < shrunk_{i+1}, i.e. where the sample order is not kept."""
        return np.flatnonzero(np.diff(self.shrunk_eigenvalues) > 0)


def _check_positive(values: np.ndarray, label: str) -> None:
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        warnings.warn(f"{label}: {bad.size} shrunk eigenvalues are not positive", stacklevel=3)


# --------------------------------------------------------------------------
# empirical Stieltjes transform and algorithmic shrinkage
# --------------------------------------------------------------------------


def empirical_stieltjes(lambdas: ArrayLike, M: int, N: int, z: ArrayLike) -> np.ndarray | complex:  # noqa: N803
    """g(z) = (1/N) sum_j 1/(lambda_j - z) - (1 - M/N)/z."""
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size != M:
        raise InputError("number of eigenvalues differs from M")
    if M > N:
        raise InputError("the empirical transform needs M <= N")
    zz = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(zz).ravel()
    gaps = lam[None, :] - flat[:, None]
    if np.any(np.abs(gaps) < POLE_TOL) or np.any(np.abs(flat) < POLE_TOL):
        raise PoleHit("z coincides with a sample eigenvalue or with 0")
    g = np.sum(1.0 / gaps, axis=1) / N - (1.0 - M / N) / flat
    return complex(g[0]) if zz.ndim == 0 else g.reshape(zz.shape)


def default_eta(N: int) -> float:  # noqa: N803
    return float(N) ** -0.5


def _algorithmic_inputs(decomp: SampleDecomposition, eta: float | None) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    if decomp.M >= decomp.N:
        raise InputError(f"shrinkage requires M < N (got M={decomp.M}, N={decomp.N})")
    lam = decomp.sample_eigenvalues
    eta = default_eta(decomp.N) if eta is None else float(eta)
    if not 0 < eta < 1:
        raise InputError("eta must lie in (0, 1)")
    lo, hi = decomp.N ** (-2.0 / 3.0 + 0.01), decomp.N ** (-0.01)
    if not lo <= eta <= hi:
        warnings.warn(
            f"eta = {eta:.3g} is outside [N^(-2/3+0.01), N^(-0.01)] = [{lo:.3g}, {hi:.3g}]",
            stacklevel=3,
        )
    if lam[-1] <= DEGENERACY_TOL * lam[0]:
        raise DegenerateSpectrum("smallest sample eigenvalue is numerically zero")
    z = lam * (1.0 + 1j * eta)
    g = np.asarray(empirical_stieltjes(lam, decomp.M, decomp.N, z))
    return lam, eta, z, g


def shrink_frobenius(decomp: SampleDecomposition, eta: float | None = None) -> ShrinkageResult:
    """lambda_hat_i = 1 / (lambda_i |g(z_i)|^2) with z_i = lambda_i (1 + i eta)."""
    lam, eta, z, g = _algorithmic_inputs(decomp, eta)
    out = 1.0 / (lam * np.abs(g) ** 2)
    _check_positive(out, "frobenius")
    return ShrinkageResult(LossKind.FROBENIUS, Mode.ALGORITHMIC, out, eta, z)


def _finv_formula(lam: np.ndarray, re_m: np.ndarray, ratio: float) -> np.ndarray:
    denom = 1.0 - ratio + 2.0 * lam * re_m
    if np.any(np.abs(denom) < DENOMINATOR_TOL):
        raise DenominatorNearZero("|1 - M/N + 2 lambda Re m| below 1e-10")
    return -lam / denom


def shrink_inverse_frobenius(decomp: SampleDecomposition, eta: float | None = None) -> ShrinkageResult:
    """lambda_hat_i = -lambda_i / (1 - M/N + 2 lambda_i Re g(z_i))."""
    lam, eta, z, g = _algorithmic_inputs(decomp, eta)
    out = _finv_formula(lam, g.real, decomp.ratio)
    _check_positive(out, "inverse frobenius")
    return ShrinkageResult(LossKind.INVERSE_FROBENIUS, Mode.ALGORITHMIC, out, eta, z)


def shrink(decomp: SampleDecomposition, loss_kind: str | LossKind, eta: float | None = None) -> ShrinkageResult:
    kind = LossKind.parse(loss_kind)
    if kind is LossKind.FROBENIUS:
        return shrink_frobenius(decomp, eta)
    return shrink_inverse_frobenius(decomp, eta)


# --------------------------------------------------------------------------
# oracle and transitional shrinkage
# --------------------------------------------------------------------------


def oracle_shrinkage(
    decomp: SampleDecomposition,
    population: ArrayLike,
    loss_kind: str | LossKind = LossKind.FROBENIUS,
) -> ShrinkageResult:
    """u_i^T Sigma u_i (Frobenius) or 1 / (u_i^T Sigma^{-1} u_i) (inverse Frobenius).

    ``population`` is a dense symmetric M x M matrix in the frame of the
    eigenvectors, or a length-M vector of eigenvalues when the data were
    generated in the population eigenbasis.
    """
    kind = LossKind.parse(loss_kind)
    u = decomp.eigenvectors
    pop = np.asarray(population, dtype=float)
    if pop.ndim == 1:
        if pop.size != decomp.M:
            raise InputError("population eigenvalues have the wrong length")
        if kind is LossKind.FROBENIUS:
            vals = (u * u).T @ pop
        else:
            if np.any(pop <= 0):
                raise NonSPD("population covariance is not positive definite")
            vals = 1.0 / ((u * u).T @ (1.0 / pop))
    elif pop.ndim == 2 and pop.shape == (decomp.M, decomp.M):
        if not np.allclose(pop, pop.T, rtol=1e-10, atol=1e-12 * max(1.0, np.max(np.abs(pop)))):
            raise InputError("population matrix is not symmetric")
        if kind is LossKind.FROBENIUS:
            vals = np.einsum("ji,jk,ki->i", u, pop, u)
        else:
            try:
                chol = np.linalg.cholesky(0.5 * (pop + pop.T))
            except np.linalg.LinAlgError as exc:
                raise NonSPD("population covariance is not positive definite") from exc
            # u^T Sigma^{-1} u = |L^{-1} u|^2
            x = np.linalg.solve(chol, u)
            vals = 1.0 / np.sum(x * x, axis=0)
    else:
        raise InputError("population must be an M-vector or an M x M matrix")
    return ShrinkageResult(kind, Mode.ORACLE, np.asarray(vals, dtype=float))


def transitional_shrinkage(
    points: SampleDecomposition | ArrayLike,
    spectrum: PopulationSpectrum,
    loss_kind: str | LossKind = LossKind.FROBENIUS,
) -> ShrinkageResult:
    """1/(lambda |m(lambda)|^2) or -lambda/(1 - M/N + 2 lambda Re m(lambda)) on the real axis.

    ``points`` are eigenvalue-scale locations: the sample eigenvalues of a
    decomposition, or e.g. squared classical locations.
    """
    kind = LossKind.parse(loss_kind)
    lam = points.sample_eigenvalues if isinstance(points, SampleDecomposition) else np.asarray(points, dtype=float)
    lam = np.atleast_1d(lam).astype(float)
    if np.any(lam <= 0):
        raise InputError("transitional shrinkage needs positive locations")
    m = boundary_stieltjes_array(spectrum, lam)
    if kind is LossKind.FROBENIUS:
        out = 1.0 / (lam * np.abs(m) ** 2)
    else:
        out = _finv_formula(lam, m.real, spectrum.ratio)
    _check_positive(out, "transitional")
    return ShrinkageResult(kind, Mode.TRANSITIONAL, out)


# --------------------------------------------------------------------------
# losses and estimator assembly
# --------------------------------------------------------------------------


def loss(A: ArrayLike, B: ArrayLike, loss_kind: str | LossKind = LossKind.FROBENIUS) -> float:  # noqa: N803
    """M^{-1} ||A - B||_F^2, or the same on the inverses."""
    kind = LossKind.parse(loss_kind)
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("loss needs two square matrices of equal size")
    if kind is LossKind.INVERSE_FROBENIUS:
        try:
            for mat in (a, b):
                if np.linalg.cond(mat) > 1e14:
                    raise NonInvertible("matrix is numerically singular")
            a, b = np.linalg.inv(a), np.linalg.inv(b)
        except np.linalg.LinAlgError as exc:
            raise NonInvertible("matrix is singular") from exc
    diff = a - b
    return float(np.sum(diff * diff) / a.shape[0])


def eigenvalue_loss(x: ArrayLike, y: ArrayLike, loss_kind: str | LossKind = LossKind.FROBENIUS) -> float:
    """Loss between two estimators sharing one eigenbasis, from their eigenvalues alone."""
    kind = LossKind.parse(loss_kind)
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if kind is LossKind.INVERSE_FROBENIUS:
        a, b = 1.0 / a, 1.0 / b
    return float(np.mean((a - b) ** 2))


def assemble_estimator(decomp: SampleDecomposition, result: ShrinkageResult | ArrayLike) -> np.ndarray:
    """sum_i lambda_hat_i u_i u_i^T."""
    vals = result.shrunk_eigenvalues if isinstance(result, ShrinkageResult) else np.asarray(result, dtype=float)
    u = decomp.eigenvectors
    if vals.shape != (u.shape[1],):
        raise InputError("shrunk eigenvalues do not match the eigenvector count")
    est = (u * vals[None, :]) @ u.T
    return 0.5 * (est + est.T)
