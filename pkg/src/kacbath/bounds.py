"""Closed-form convergence bound and the two-regime scaling study.

The distance between the finite-reservoir and infinite-bath evolutions
of the same initial data is bounded by

    B(t) = [ C (1 - e^{-lambda M t}) + b (M/sqrt(N)) (e^{-mu t/3} - e^{-k t}) ]
           * ||h0 - 1||,

with lambda = lambda_S/2 + mu, C the rotation-projector constant,
k the spectral gap of the reservoir generator off the conserved
quantities, l the one-particle averaging defect sup, and
b = mu l / (k - mu/3). The first term is the permanent budget (it
saturates at C ||h0 - 1||); the second is the transient bump, of order
M/sqrt(N) at its peak.

k and l are certified here only as truncated-space, per-configuration
estimates supplied by the spectral module; nothing assumes they are
independent of (M, N) even though the displayed formula treats them as
constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, log, sqrt
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DegenerateBoundError, ToleranceError
from .evolution import default_time_grid, distance_curve, long_time_limit
from .hermite import HermiteCoeffs, make_basis
from .kinematics import ModelParams
from .projector import lemma1_constant
from .spectral import (
    OperatorMatrix,
    assemble_T,
    assemble_generator,
    invariant_projector,
    spectral_gap,
)

# |k - mu/3| below this is treated as degenerate (the two exponentials
# coincide and b blows up; see make_bound_params).
DEGENERACY_TOL = 1e-12
_PSD_TOL = 1e-12


def lambda_rate(lambda_s: float, mu: float) -> float:
    """Decay-budget rate of the permanent term: lambda_S/2 + mu."""
    if lambda_s < 0.0 or mu < 0.0:
        raise ConfigError("rates must be nonnegative")
    return lambda_s / 2.0 + mu


def estimate_l(t: OperatorMatrix, d: int | None = None) -> float:
    """sup over unit u of sqrt(<u, Tu> - <Tu, Tu>) on the truncation.

    Equals the square root of the top eigenvalue of T - T^2 restricted
    to total degree <= d. T is self-adjoint with spectrum in [0, 1], so
    T - T^2 is positive semidefinite; an eigenvalue below -1e-12 means
    the assembly is broken and raises.
    """
    if d is None:
        d = t.basis.degree
    if d < 0 or d > t.basis.degree:
        raise ConfigError(f"degree cap {d} outside [0, {t.basis.degree}]")
    top = 0.0
    for m in range(d + 1):
        block = t.block(m)
        gap = block - block @ block
        evals = np.linalg.eigvalsh(0.5 * (gap + gap.T))
        if evals[0] < -_PSD_TOL:
            raise ToleranceError(
                f"T - T^2 has eigenvalue {evals[0]:.3e} at degree {m}; "
                "the operator assembly violates the contraction property"
            )
        top = max(top, float(evals[-1]))
    return sqrt(top)


@dataclass(frozen=True)
class BoundParams:
    """Assembled constants of the convergence bound."""

    c: float
    lam: float
    mu: float
    k: float
    l: float
    b: float
    h0_norm: float

    def __post_init__(self):
        if not (self.c > 0.0 and self.lam > 0.0 and self.k > 0.0):
            raise ConfigError("C, lambda, and k must all be positive")
        if self.l < 0.0 or self.h0_norm < 0.0:
            raise ConfigError("l and ||h0 - 1|| cannot be negative")
        if self.l > 0.0 and self.b * (self.k - self.mu / 3.0) < 0.0:
            raise ConfigError("b must carry the sign of k - mu/3")


def make_bound_params(
    c: float,
    lambda_s: float,
    mu: float,
    k: float,
    l: float,
    h0_norm: float,
) -> BoundParams:
    """Assemble BoundParams, guarding the b = mu l / (k - mu/3) pole.

    Within DEGENERACY_TOL of k = mu/3 the two exponentials of the bump
    coincide and the transient degenerates to mu l t e^{-mu t/3}; that
    limit form is not implemented, so the caller must perturb k or mu.
    """
    denom = k - mu / 3.0
    if abs(denom) < DEGENERACY_TOL:
        raise DegenerateBoundError(
            f"k - mu/3 = {denom:.3e}: the bump coefficient diverges; in this "
            "limit the transient term becomes mu*l*t*exp(-mu*t/3), so rerun "
            "with separated rates instead"
        )
    return BoundParams(
        c=c,
        lam=lambda_rate(lambda_s, mu),
        mu=mu,
        k=k,
        l=l,
        b=mu * l / denom,
        h0_norm=h0_norm,
    )


class BoundCurve(NamedTuple):
    times: tuple[float, ...]
    total: tuple[float, ...]
    term1: tuple[float, ...]
    term2: tuple[float, ...]


def bound_curve(bp: BoundParams, m: int, n: int, times) -> BoundCurve:
    """Pointwise bound values with the permanent and bump terms split out.

    term1 = C (1 - e^{-lambda M t}) ||h0-1|| is nondecreasing from 0 to
    C ||h0-1||; term2 = b (M/sqrt(N)) (e^{-mu t/3} - e^{-k t}) ||h0-1||
    vanishes at 0 and infinity and is nonnegative whenever k > mu/3.
    """
    if m < 1 or n < 1:
        raise ConfigError(f"need M >= 1, N >= 1, got M={m}, N={n}")
    arr = np.asarray(times, dtype=float)
    if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ConfigError("times must be finite and nonnegative")
    t1 = bp.c * (1.0 - np.exp(-bp.lam * m * arr)) * bp.h0_norm
    shape = np.exp(-bp.mu * arr / 3.0) - np.exp(-bp.k * arr)
    t2 = bp.b * (m / sqrt(n)) * shape * bp.h0_norm
    return BoundCurve(
        times=tuple(float(x) for x in arr),
        total=tuple(float(x) for x in t1 + t2),
        term1=tuple(float(x) for x in t1),
        term2=tuple(float(x) for x in t2),
    )


def bump_peak(bp: BoundParams, m: int, n: int) -> tuple[float, float]:
    """Peak of the transient term and its location, in closed form.

    For k != mu/3 the maximum of e^{-at} - e^{-bt} with a = mu/3, b = k
    sits at t* = log(b/a)/(b - a).
    """
    a = bp.mu / 3.0
    b = bp.k
    if a <= 0.0:
        raise ConfigError("bump peak undefined for mu = 0")
    tstar = log(b / a) / (b - a)
    val = bp.b * (m / sqrt(n)) * (exp(-a * tstar) - exp(-b * tstar)) * bp.h0_norm
    return val, tstar


def anisotropic_pair_data(eps: float) -> HermiteCoeffs:
    """Initial density 1 + eps (h2(v1x) - h2(v1y)) on one tagged particle.

    The perturbation is a trace-free second-degree harmonic, orthogonal
    to the total energy and to every momentum component and their
    products, so its long-time survival under the reservoir coupling
    comes only through the momentum-quadratic invariants and scales
    like 1/(M+N); energy-carrying data would instead leave a 1/sqrt(N)
    residue. The perturbation is unbounded below, so only small |eps|
    gives a true (nonnegative) density; the importance sampler checks
    pointwise rather than this constructor.
    """
    if not np.isfinite(eps):
        raise ConfigError("eps must be finite")
    b = make_basis(3, 2)
    vec = np.zeros(b.size)
    vec[0] = 1.0
    vec[b.index[(2, 0, 0)]] = eps
    vec[b.index[(0, 2, 0)]] = -eps
    return HermiteCoeffs(b, vec)


@dataclass(frozen=True)
class ScalingRow:
    n: int
    limit: float
    gap: float
    bump: float


@dataclass(frozen=True)
class ScalingStudy:
    """Two-regime scaling table across reservoir sizes at fixed M.

    Per N: the measured long-time limit of the exact distance curve
    (permanent regime, expected ~ M/N) and the closed-form peak of the
    bound's transient term evaluated with that configuration's measured
    spectral gap (bump regime, expected ~ M/sqrt(N)). `p` and `q` are
    the least-squares power-law exponents of the two columns.
    """

    m: int
    degree: int
    eps: float
    rows: tuple[ScalingRow, ...]
    p: float
    q: float


def scaling_study(
    m: int,
    ns: tuple[int, ...] = (2, 4, 8, 16),
    eps: float = 0.2,
    lambda_s: float = 1.0,
    lambda_r: float = 1.0,
    mu: float = 1.0,
    t_end: float = 80.0,
    grid_count: int = 56,
    d: int = 2,
    cross_check: bool = True,
) -> ScalingStudy:
    """Measure both scaling regimes of the coupling distance.

    For each reservoir size: evolve the anisotropic pair perturbation
    under both couplings, read off the long-time limit, estimate the
    spectral gap, and evaluate the bound's bump peak with it. Fits
    log-log power laws through the limit and bump columns.
    """
    if len(ns) < 2:
        raise ConfigError("need at least two reservoir sizes to fit exponents")
    h0 = anisotropic_pair_data(eps)
    tbath = assemble_T(1, d)
    l_hat = estimate_l(tbath)
    grid = default_time_grid(t_end, count=grid_count)

    rows = []
    for n in ns:
        p = ModelParams(m, n, lambda_s=lambda_s, lambda_r=lambda_r, mu=mu)
        curve = distance_curve(p, h0, grid, d=d, cross_check=cross_check)
        limit = long_time_limit(curve)
        gen = assemble_generator("reservoir", p, d)
        _, _, comp = invariant_projector(p, d)
        k_hat = spectral_gap(gen, comp)
        bp = make_bound_params(
            c=lemma1_constant(m, n).c,
            lambda_s=lambda_s,
            mu=mu,
            k=k_hat,
            l=l_hat,
            h0_norm=h0.fluctuation_norm(),
        )
        bump, _ = bump_peak(bp, m, n)
        rows.append(ScalingRow(n=n, limit=limit, gap=k_hat, bump=bump))

    logn = np.log([r.n for r in rows])
    p_fit = -float(np.polyfit(logn, np.log([r.limit for r in rows]), 1)[0])
    q_fit = -float(np.polyfit(logn, np.log([r.bump for r in rows]), 1)[0])
    return ScalingStudy(
        m=m, degree=d, eps=eps, rows=tuple(rows), p=p_fit, q=q_fit
    )
