"""Eigenvector and singular-vector overlaps: deterministic predictions and empirical values.

The dilation H = [[0, Y], [Y^T, 0]] / sqrt(N) has eigenpairs (+-s_i, xi_{+-i})
with xi_{+-i} = (u_i; +-v_i)/sqrt(2) for i <= min(M, N), plus |M - N| null
vectors supported on the larger block.  Predictions are evaluated at real
classical locations with the real-axis limits of m and Gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InputError
from .kernels import BlockObservable
from .spectral import PopulationSpectrum, boundary_stieltjes_array


# --------------------------------------------------------------------------
# dilation spectrum
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DilationSpectrum:
    """Signed singular values and dilation eigenvectors of Y / sqrt(N).

    Index set: +-1, ..., +-K with K = min(M, N) for the paired vectors, then
    K+1, ..., K+|M-N| for the null vectors (eigenvalue 0).
    """

    singular_values: NDArray[np.float64]
    left: NDArray[np.float64]
    right: NDArray[np.float64]
    M: int
    N: int

    @property
    def K(self) -> int:  # noqa: N802
        return min(self.M, self.N)

    @property
    def indices(self) -> list[int]:
        k = self.K
        return list(range(1, k + 1)) + [-i for i in range(1, k + 1)] + list(range(k + 1, k + 1 + abs(self.M - self.N)))

    def _check(self, i: int) -> None:
        k = self.K
        if i == 0 or i < -k or i > k + abs(self.M - self.N):
            raise InputError(f"index {i} is not in the dilation index set")

    def value(self, i: int) -> float:
        self._check(i)
        if abs(i) > self.K:
            return 0.0
        s = float(self.singular_values[abs(i) - 1])
        return s if i > 0 else -s

    def vector(self, i: int) -> np.ndarray:
        self._check(i)
        out = np.zeros(self.M + self.N)
        k = self.K
        if i > k:
            if self.M > self.N:
                out[: self.M] = self.left[:, i - 1]
            else:
                out[self.M :] = self.right[:, i - 1]
            return out
        a = abs(i) - 1
        sign = 1.0 if i > 0 else -1.0
        out[: self.M] = self.left[:, a] / np.sqrt(2.0)
        out[self.M :] = sign * self.right[:, a] / np.sqrt(2.0)
        return out

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """All eigenvalues and eigenvectors (as columns) in index-set order."""
        idx = self.indices
        vals = np.array([self.value(i) for i in idx])
        vecs = np.column_stack([self.vector(i) for i in idx])
        return vals, vecs

    def dilation(self) -> np.ndarray:
        """Reassemble H from the stored decomposition."""
        vals, vecs = self.matrix()
        return (vecs * vals) @ vecs.T

    def u_overlaps(self, D1: ArrayLike) -> np.ndarray:  # noqa: N803
        """<u_i, D1 u_i> for i = 1..K (D1 an M x M matrix or M-vector diagonal)."""
        u = self.left[:, : self.K]
        d = np.asarray(D1)
        if d.ndim == 1:
            return np.real_if_close((u * u).T @ d)
        return np.real_if_close(np.einsum("ji,jk,ki->i", u, d, u))

    def v_overlaps(self, D2: ArrayLike) -> np.ndarray:  # noqa: N803
        v = self.right[:, : self.K]
        d = np.asarray(D2)
        if d.ndim == 1:
            return np.real_if_close((v * v).T @ d)
        return np.real_if_close(np.einsum("ji,jk,ki->i", v, d, v))

    def uv_overlaps(self, D3: ArrayLike) -> np.ndarray:  # noqa: N803
        """<u_i, D3 v_i> for i = 1..K (D3 an M x N matrix)."""
        u = self.left[:, : self.K]
        v = self.right[:, : self.K]
        return np.real_if_close(np.einsum("ji,jk,ki->i", u, np.asarray(D3), v))


def build_dilation(Y: ArrayLike) -> DilationSpectrum:  # noqa: N803
    """Dilation eigenpairs from the full SVD of Y / sqrt(N)."""
    y = np.asarray(Y, dtype=float)
    if y.ndim != 2 or min(y.shape) == 0:
        raise InputError("data matrix must be two-dimensional and nonempty")
    m, n = y.shape
    u, s, vt = np.linalg.svd(y / np.sqrt(n), full_matrices=True)
    return DilationSpectrum(s, u, vt.T.copy(), m, n)


def empirical_overlap(dilation: DilationSpectrum, i: int, j: int, D: ArrayLike | BlockObservable) -> complex:  # noqa: N803
    """Plain inner product xi_i^T D xi_j (no trace normalization)."""
    d = D.data if isinstance(D, BlockObservable) else np.asarray(D)
    if d.shape != (dilation.M + dilation.N,) * 2:
        raise InputError("observable must be (M+N) x (M+N)")
    val = dilation.vector(i) @ d @ dilation.vector(j)
    return complex(val) if np.iscomplexobj(val) else float(val)


# --------------------------------------------------------------------------
# deterministic predictions
# --------------------------------------------------------------------------


def _boundary_gamma(spectrum: PopulationSpectrum, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real-axis m(gamma) and Gamma(gamma) rows, one row per location."""
    if np.any(gamma <= 0):
        raise InputError("classical locations must be positive")
    mf = boundary_stieltjes_array(spectrum, gamma * gamma)
    m = gamma * mf
    big_gamma = -1.0 / (gamma[:, None] + m[:, None] * spectrum.eigenvalues[None, :])
    return m, big_gamma


def _diagonal(D: ArrayLike, size: int) -> np.ndarray:  # noqa: N803
    d = np.asarray(D)
    if d.ndim == 1:
        if d.size != size:
            raise InputError("observable diagonal has the wrong length")
        return d
    if d.shape != (size, size):
        raise InputError(f"observable must be {size} x {size}")
    return np.diag(d)


def predicted_overlap_uu(spectrum: PopulationSpectrum, gamma: ArrayLike, D1: ArrayLike) -> np.ndarray | float:  # noqa: N803
    """<Im Gamma(gamma) D1> / Im m(gamma); only the diagonal of D1 enters."""
    g = np.asarray(gamma, dtype=float)
    flat = np.atleast_1d(g).ravel()
    d = _diagonal(D1, spectrum.M)
    m, big_gamma = _boundary_gamma(spectrum, flat)
    num = (big_gamma.imag @ d) / spectrum.N
    out = np.real_if_close(num / m.imag)
    return out.item() if g.ndim == 0 else out.reshape(g.shape)


def predicted_overlap_vv(D2: ArrayLike, i: int | None = None, j: int | None = None) -> float:  # noqa: N803
    """<D2> = tr(D2)/N for diagonal overlaps, 0 when i != j."""
    if i is not None and j is not None and i != j:
        return 0.0
    d = np.asarray(D2)
    diag = d if d.ndim == 1 else np.diag(d)
    return complex(np.mean(diag)).real if np.isrealobj(diag) else complex(np.mean(diag))


def predicted_overlap_xi(spectrum: PopulationSpectrum, gamma: ArrayLike, D: ArrayLike | BlockObservable) -> np.ndarray | float:  # noqa: N803
    """<Im Pi(gamma) D> / (2 Im m(gamma)) with Pi = diag(Gamma, m I_N)."""
    g = np.asarray(gamma, dtype=float)
    flat = np.atleast_1d(g).ravel()
    d = D.data if isinstance(D, BlockObservable) else np.asarray(D)
    M, N = spectrum.M, spectrum.N  # noqa: N806
    if d.shape != (M + N, M + N):
        raise InputError("observable must be (M+N) x (M+N)")
    diag = np.diag(d)
    m, big_gamma = _boundary_gamma(spectrum, flat)
    num = (big_gamma.imag @ diag[:M] + m.imag * np.sum(diag[M:])) / N
    out = np.real_if_close(num / (2.0 * m.imag))
    return out.item() if g.ndim == 0 else out.reshape(g.shape)


def overlap_error_envelope(N: int, bulk_counts: ArrayLike, k: int, i: int, l: int, j: int) -> float:  # noqa: N803, E741
    """(N n_{k,i} n_{l,j})^{-1/6} with n_{k,i} = min(i, N_k + 1 - i); k, l are 0-based, i, j 1-based."""
    counts = np.asarray(bulk_counts, dtype=int)
    for b, r in ((k, i), (l, j)):
        if not 0 <= b < counts.size or not 1 <= r <= counts[b]:
            raise InputError("bulk or rank index out of range")
    n1 = min(i, counts[k] + 1 - i)
    n2 = min(j, counts[l] + 1 - j)
    return float((N * n1 * n2) ** (-1.0 / 6.0))
