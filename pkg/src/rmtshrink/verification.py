"""Randomized verification suite for the resolvent-kernel algebra.

Each check evaluates an exact algebraic identity (or a regularity bound)
over random spectral parameters and random observables and reports the
worst residual against its threshold.  Residuals of identities are scaled
by max(1, |reference|) so large deterministic approximations near the
real axis do not dominate the comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import (
    BlockObservable,
    KernelContext,
    apply_b12,
    apply_x12,
    is_regular,
    mde_residual,
    one_point_pre_regularize,
    one_point_regularize,
    pi_12,
    pi_123,
    t_closed_form,
    two_point_regularize_sigma,
    x12_defining_map,
    xi_defining,
    xi_matrices,
)
from .spectral import PopulationSpectrum, SupportStructure, find_support

IDENTITY_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.threshold)


def random_spectrum(rng: np.random.Generator, M: int, N: int) -> PopulationSpectrum:  # noqa: N803
    return PopulationSpectrum(rng.uniform(0.5, 3.0, M), N)


def admissible_w(
    rng: np.random.Generator,
    support: SupportStructure,
    eta_range: tuple[float, float] = (1e-3, 1.0),
    near_edge: bool = False,
) -> complex:
    """w with Re w in the square-root support, |Im w| log-uniform, random half-plane.

    With ``near_edge`` the real part is placed within |Im w| of a
    square-root edge, which keeps w inside dist(Re w, supp) <= |Im w|.
    """
    roots = np.sqrt(support.edges)
    lo_eta, hi_eta = np.log10(eta_range[0]), np.log10(eta_range[1])
    eta = 10.0 ** rng.uniform(lo_eta, hi_eta)
    k = rng.integers(0, support.n_bulks)
    lo, hi = roots[2 * k + 1], roots[2 * k]
    if near_edge:
        x = rng.choice([lo, hi]) + rng.uniform(-1.0, 1.0) * eta
        x = max(x, 0.25 * lo if lo > 0 else eta)
    else:
        x = rng.uniform(lo, hi)
    return complex(x, eta if rng.random() < 0.5 else -eta)


def random_observable(rng: np.random.Generator, M: int, N: int) -> BlockObservable:  # noqa: N803
    """Dense complex matrix scaled to operator norm 1."""
    a = rng.standard_normal((M + N, M + N)) + 1j * rng.standard_normal((M + N, M + N))
    return BlockObservable(a / np.linalg.norm(a, 2), M)


def _scaled(diff: BlockObservable | complex, ref: BlockObservable | complex) -> float:
    if isinstance(diff, BlockObservable):
        return diff.max_abs() / max(1.0, ref.max_abs())
    return abs(diff) / max(1.0, abs(ref))


def identity_suite(
    n: int = 50,
    seed: int = 0,
    trials: int = 100,
    t_fault: complex = 0.0,
    eta_range: tuple[float, float] = (1e-2, 1.0),
) -> list[CheckResult]:
    """Algebraic identities at M = N = n over ``trials`` random triples (w1, w2, w3)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 1])))
    sp = random_spectrum(rng, n, n)
    support = find_support(sp, with_locations=False)
    M, N = sp.M, sp.N  # noqa: N806
    ip = BlockObservable.identity_plus(M, N)
    im = BlockObservable.identity_minus(M, N)
    ones = np.ones(M + N)
    worst = dict.fromkeys(
        ["duality", "x_inverse", "x_of_xi", "pi_of_xi", "pi_of_identity", "pi123_divided_difference",
         "xi_explicit", "mde_residual", "t_closed_form"],
        0.0,
    )
    for _ in range(trials):
        ws = [admissible_w(rng, support, eta_range) for _ in range(3)]
        ctx = KernelContext.build(sp, ws)
        if t_fault:
            ctx = ctx.with_t_perturbation(t_fault)
        a1 = random_observable(rng, M, N)
        a2 = random_observable(rng, M, N)
        lhs = (apply_b12(ctx, a1, 0, 1) @ apply_x12(ctx, a2, 1, 0)).trace()
        rhs = (a1 @ a2).trace()
        worst["duality"] = max(worst["duality"], _scaled(lhs - rhs, rhs))
        v = apply_x12(ctx, a1)
        worst["x_inverse"] = max(worst["x_inverse"], _scaled(x12_defining_map(ctx, v) - a1, a1))
        xp, xm = xi_matrices(ctx)
        dp, dm = xi_defining(ctx)
        worst["xi_explicit"] = max(worst["xi_explicit"], _scaled(xp - dp, dp), _scaled(xm - dm, dm))
        pi1, pi2 = ctx.pi(0), ctx.pi(1)
        for xi, sign_mat in ((xp, ip), (xm, im)):
            ref = sign_mat.scale_rows_cols(1.0 / pi2, ones)
            worst["x_of_xi"] = max(worst["x_of_xi"], _scaled(apply_x12(ctx, xi) - ref, ref))
            ref = sign_mat.scale_rows_cols(pi1, ones)
            worst["pi_of_xi"] = max(worst["pi_of_xi"], _scaled(pi_12(ctx, xi) - ref, ref))
        w1, w2 = ctx.points[0].w, ctx.points[1].w
        ref = BlockObservable.from_diagonal((pi1 - pi2)[:M], (pi1 - pi2)[M:]) / (w1 - w2)
        worst["pi_of_identity"] = max(worst["pi_of_identity"], _scaled(pi_12(ctx, ip) - ref, ref))
        ref = (pi_12(ctx, a2, 0, 2) - pi_12(ctx, a2, 1, 2)) / (w1 - w2)
        worst["pi123_divided_difference"] = max(
            worst["pi123_divided_difference"], _scaled(pi_123(ctx, ip, a2) - ref, ref)
        )
        for p in ctx.points:
            worst["mde_residual"] = max(worst["mde_residual"], mde_residual(sp, p.w, p.m))
        tc = t_closed_form(ctx)
        worst["t_closed_form"] = max(worst["t_closed_form"], _scaled(ctx.t(0, 1) - tc, tc))
    return [CheckResult(k, v, IDENTITY_TOL) for k, v in worst.items()]


def regularity_suite(
    n: int = 50,
    seed: int = 0,
    trials: int = 200,
    multiplier: float = 10.0,
    ratio: float = 0.5,
    eta_range: tuple[float, float] = (1e-3, 1.0),
) -> list[CheckResult]:
    """One-point, pre- and two-point regularizations checked by ``is_regular``.

    Half the trials put the parameters near a spectral edge.  Residuals are
    worst achieved ratios (threshold = multiplier); reconstruction errors of
    the coefficient decompositions have their own threshold.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 2])))
    M = n  # noqa: N806
    N = int(round(n / ratio))  # noqa: N806
    sp = random_spectrum(rng, M, N)
    support = find_support(sp, with_locations=False)
    ip = BlockObservable.identity_plus(M, N)
    im = BlockObservable.identity_minus(M, N)
    s_plus = BlockObservable.sigma_plus(sp)
    s_minus = BlockObservable.sigma_minus(sp)
    worst = {"one_point": 0.0, "pre": 0.0, "two_point": 0.0, "reconstruction": 0.0, "trace_n": 0.0}
    for t in range(trials):
        near = t % 2 == 0
        w1 = admissible_w(rng, support, eta_range, near)
        w2 = admissible_w(rng, support, eta_range, near)
        if t % 4 == 1:
            # close pair so the two-point indicator is active
            w2 = complex(w1.real + 0.05 * rng.standard_normal(), w1.imag * (1 if rng.random() < 0.5 else -1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ctx = KernelContext.build(sp, [w1, w2])
        d = random_observable(rng, M, N)

        def score(key: str, a: BlockObservable) -> None:
            rep = is_regular(ctx, a, multiplier)
            worst[key] = max(worst[key], rep.worst_ratio, rep.norm)
            worst["trace_n"] = max(worst["trace_n"], abs(rep.trace_n))

        for k in (0, 1):
            a, tp, tm = one_point_regularize(sp, ctx.points[k], d)
            score("one_point", a)
            worst["reconstruction"] = max(worst["reconstruction"], (a + tp * ip + tm * im - d).max_abs())
            b, sp_, sm_ = one_point_pre_regularize(sp, ctx.points[k], d)
            worst["reconstruction"] = max(worst["reconstruction"], (b + sp_ * ip + sm_ * im - d).max_abs())
            score("pre", b @ s_plus)
            score("pre", b @ s_minus)
        sig, _ = two_point_regularize_sigma(ctx, support)
        score("two_point", sig)
    return [
        CheckResult("regular_one_point", worst["one_point"], multiplier),
        CheckResult("regular_pre", worst["pre"], multiplier),
        CheckResult("regular_two_point", worst["two_point"], multiplier),
        CheckResult("regular_trace_n", worst["trace_n"], IDENTITY_TOL),
        CheckResult("coefficient_reconstruction", worst["reconstruction"], RECONSTRUCTION_TOL),
    ]


def run_kernel_suite(
    n: int = 50,
    seed: int = 0,
    multiplier: float = 10.0,
    trials: int = 100,
    t_fault: complex = 0.0,
) -> list[CheckResult]:
    return identity_suite(n, seed, trials, t_fault) + regularity_suite(n, seed, 2 * trials, multiplier)
