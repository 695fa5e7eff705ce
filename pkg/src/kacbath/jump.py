"""Continuous-time jump simulation of both couplings.

Direct Gillespie stepping: all jump rates are state-independent, so the
waiting time is exponential with a constant total rate and the event
category, colliding pair, and collision direction are drawn fresh per
event. There is no time discretization anywhere; trajectories are
piecewise constant and observables are read off the state at the last
event before each record time.

The two couplings share everything except one event category: the
finite-reservoir coupling ("reservoir") scatters system particles
against reservoir particles, while the infinite-bath coupling
("thermostat") scatters them against a Gaussian partner that is drawn
for the event and thrown away afterwards.

Per-event randomness order is fixed (waiting time, category, indices,
direction, bath partner) so that a seed fully determines a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, NegativeWeightError, StateError
from .hermite import HermiteCoeffs
from .kinematics import JointState, ModelParams
from .randomness import GAMMA_SIGMA, RngStream

SYSTEM_KINDS = ("reservoir", "thermostat")

_CONSERVE_TOL = 1e-10


@dataclass(frozen=True)
class EventKind:
    """One jump event: which category fired and which members collided.

    Indices are local to their block: system and thermostat events index
    system particles, reservoir events index reservoir particles, and an
    interaction event pairs system particle i with reservoir particle j.
    Thermostat events have no persistent partner (j is None).
    """

    category: str
    i: int
    j: int | None

    def __post_init__(self):
        if self.category not in ("system", "reservoir", "interaction", "thermostat"):
            raise ConfigError(f"unknown event category {self.category!r}")
        if self.category == "thermostat":
            if self.j is not None:
                raise ConfigError("thermostat events have no partner index")
        elif self.j is None or (self.category != "interaction" and self.i == self.j):
            raise ConfigError("pair events need two distinct indices")


class RateTable(NamedTuple):
    system: float
    reservoir: float
    interaction: float
    thermostat: float
    total: float


def event_rates(p: ModelParams, kind: str) -> RateTable:
    """Per-category total jump rates and their sum.

    System pairs fire at lambda_s/(M-1) each, M(M-1)/2 of them, for a
    category total of lambda_s*M/2 (zero when M = 1); reservoir pairs
    analogously total lambda_r*N/2; the coupling contributes mu/N per
    system-reservoir pair (total mu*M) or, for the infinite bath, mu per
    system particle (the same total mu*M).
    """
    if kind not in SYSTEM_KINDS:
        raise ConfigError(f"kind must be one of {SYSTEM_KINDS}, got {kind!r}")
    system = 0.0 if p.m < 2 else p.lambda_s * p.m / 2.0
    reservoir = p.lambda_r * p.n / 2.0
    coupling = p.mu * p.m
    interaction = coupling if kind == "reservoir" else 0.0
    thermostat = coupling if kind == "thermostat" else 0.0
    total = system + reservoir + interaction + thermostat
    if total <= 0.0:
        raise ConfigError("all jump rates vanish; nothing to simulate")
    return RateTable(system, reservoir, interaction, thermostat, total)


def _unit3(rng) -> np.ndarray:
    while True:
        x = rng.standard_normal(3)
        s = float(x @ x)
        if s > 0.0:
            return x / sqrt(s)


def _one_event(
    vw: np.ndarray, m: int, n: int, rates: RateTable, stream: RngStream,
    check: bool = False,
) -> tuple[str, int, int | None]:
    """Apply one jump event in place to the stacked (M+N, 3) state.

    Returns (category, i, j) with block-local indices as in EventKind.
    With check=True the pair conservation laws are verified per event.
    """
    rng = stream.rng
    u = rng.random() * rates.total
    if u < rates.system:
        category = "system"
        i = int(rng.integers(m))
        j = int(rng.integers(m - 1))
        j += j >= i
        a, b = i, j
    elif u < rates.system + rates.reservoir:
        category = "reservoir"
        i = int(rng.integers(n))
        j = int(rng.integers(n - 1))
        j += j >= i
        a, b = m + i, m + j
    elif u < rates.system + rates.reservoir + rates.interaction:
        category = "interaction"
        i = int(rng.integers(m))
        j = int(rng.integers(n))
        a, b = i, m + j
    else:
        category = "thermostat"
        i = int(rng.integers(m))
        j = None
        a, b = i, -1

    om = _unit3(rng)
    if category == "thermostat":
        partner = rng.normal(0.0, GAMMA_SIGMA, 3)
        va = vw[a]
        rel = float((va - partner) @ om)
        if check:
            before = float(va @ va + partner @ partner)
        vw[a] = va - rel * om
        if check:
            out = partner + rel * om
            after = float(vw[a] @ vw[a] + out @ out)
            if abs(after - before) > _CONSERVE_TOL * max(1.0, abs(before)):
                raise StateError(f"thermostat event broke pair energy: {after - before:.3e}")
    else:
        va, vb = vw[a].copy(), vw[b]
        rel = float((va - vb) @ om)
        if check:
            e_before = float(va @ va + vb @ vb)
            p_before = va + vb
        vw[a] = va - rel * om
        vw[b] = vb + rel * om
        if check:
            e_after = float(vw[a] @ vw[a] + vw[b] @ vw[b])
            if abs(e_after - e_before) > _CONSERVE_TOL * max(1.0, abs(e_before)):
                raise StateError(f"pair event broke energy: {e_after - e_before:.3e}")
            drift = np.max(np.abs(vw[a] + vw[b] - p_before))
            if drift > _CONSERVE_TOL:
                raise StateError(f"pair event broke momentum: {drift:.3e}")
    return category, i, j


def step(
    s: JointState, p: ModelParams, kind: str, stream: RngStream,
) -> tuple[JointState, float, EventKind]:
    """One exact jump step: returns (new state, waiting time, event).

    The waiting time is Exponential(total rate); the event is chosen
    with probability proportional to its category rate and uniformly
    within the category. The input state is not modified.
    """
    if s.m != p.m or s.n != p.n:
        raise StateError(f"state is ({s.m},{s.n}) but params are ({p.m},{p.n})")
    rates = event_rates(p, kind)
    dt = float(stream.rng.exponential(1.0 / rates.total))
    vw = np.vstack([s.v, s.w])
    category, i, j = _one_event(vw, p.m, p.n, rates, stream)
    out = JointState(vw[: p.m].copy(), vw[p.m :].copy())
    return out, dt, EventKind(category, i, j)


def simulate_events(
    s: JointState, p: ModelParams, kind: str, n_events: int, stream: RngStream,
    check: bool = False,
) -> JointState:
    """Run a fixed number of jump events and return the final state.

    Waiting times are still drawn (keeping the randomness sequence
    identical to step-by-step simulation) but not accumulated; this is
    the throughput path for conservation soak tests.
    """
    rates = event_rates(p, kind)
    vw = np.vstack([s.v, s.w])
    scale = 1.0 / rates.total
    for _ in range(n_events):
        stream.rng.exponential(scale)
        _one_event(vw, p.m, p.n, rates, stream, check=check)
    return JointState(vw[: p.m].copy(), vw[p.m :].copy())


@dataclass(frozen=True)
class SimConfig:
    """Ensemble run description: horizon, record grid, size, seed, coupling."""

    t_end: float
    record_times: tuple[float, ...]
    ensemble: int
    seed: int
    system_kind: str

    def __post_init__(self):
        if self.system_kind not in SYSTEM_KINDS:
            raise ConfigError(
                f"system_kind must be one of {SYSTEM_KINDS}, got {self.system_kind!r}"
            )
        if self.ensemble < 1:
            raise ConfigError(f"ensemble size must be positive, got {self.ensemble}")
        if not np.isfinite(self.t_end) or self.t_end < 0.0:
            raise ConfigError(f"t_end must be finite and nonnegative, got {self.t_end}")
        times = np.asarray(self.record_times, dtype=float)
        if times.size == 0:
            raise ConfigError("record_times must be nonempty")
        if np.any(np.diff(times) < 0.0):
            raise ConfigError("record_times must be sorted")
        if times[0] < 0.0 or times[-1] > self.t_end:
            raise ConfigError("record_times must lie within [0, t_end]")


@dataclass(frozen=True)
class MomentRecord:
    time: float
    observable: str
    mean: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if self.std_error < 0.0:
            raise StateError("standard error cannot be negative")


def sample_equilibrium(p: ModelParams, stream: RngStream) -> JointState:
    """A state drawn exactly from the background Gaussian."""
    flat = stream.rng.normal(0.0, GAMMA_SIGMA, 3 * (p.m + p.n))
    return JointState(flat[: 3 * p.m].reshape(p.m, 3), flat[3 * p.m :].reshape(p.n, 3))


@dataclass(frozen=True)
class EquilibriumInit:
    """Exact stationary initial condition: unit weights, Gaussian states."""

    def sample(self, p: ModelParams, stream: RngStream) -> tuple[JointState, float]:
        return sample_equilibrium(p, stream), 1.0


@dataclass(frozen=True)
class PerturbationInit:
    """Importance sampler for an initial density (ratio to the Gaussian) h0.

    States are drawn from the Gaussian and carry weight h0(state), so
    weighted ensemble averages estimate moments under the perturbed
    density without needing to sample it directly; this is exact for
    any polynomial h0. A genuine density satisfies h0 >= 0, which is
    enforced on every draw. h0 may depend on the system velocities
    alone (3M variables) or on the full state (3(M+N) variables).
    """

    h0: HermiteCoeffs

    def sample(self, p: ModelParams, stream: RngStream) -> tuple[JointState, float]:
        state = sample_equilibrium(p, stream)
        nv = self.h0.basis.nvars
        flat = state.flatten()
        if nv == 3 * p.m:
            x = flat[: 3 * p.m]
        elif nv == 3 * (p.m + p.n):
            x = flat
        else:
            raise StateError(
                f"h0 must live on {3 * p.m} or {3 * (p.m + p.n)} variables, got {nv}"
            )
        weight = float(self.h0.evaluate(x[None, :])[0])
        if weight < 0.0:
            raise NegativeWeightError(
                f"initial density is negative ({weight:.3e}) at a sampled state; "
                "shrink the perturbation"
            )
        return state, weight


def _member_rows(
    member_range: range,
    cfg: SimConfig,
    p: ModelParams,
    init,
    obs_fns: Sequence[Callable[[JointState], float]],
    check: bool,
) -> np.ndarray:
    """Weighted observable values for a block of ensemble members.

    Returns shape (len(member_range), n_times, n_obs). Each member uses
    its own stream keyed by member index, so the result is independent
    of how members are grouped into blocks.
    """
    rates = event_rates(p, cfg.system_kind)
    scale = 1.0 / rates.total
    out = np.empty((len(member_range), len(cfg.record_times), len(obs_fns)))
    for row, member in enumerate(member_range):
        stream = RngStream(cfg.seed, member)
        state, weight = init.sample(p, stream)
        vw = np.vstack([state.v, state.w])
        t_next = float(stream.rng.exponential(scale))
        for k, tau in enumerate(cfg.record_times):
            while t_next <= tau:
                _one_event(vw, p.m, p.n, rates, stream, check=check)
                t_next += float(stream.rng.exponential(scale))
            snapshot = JointState(vw[: p.m].copy(), vw[p.m :].copy())
            for o, fn in enumerate(obs_fns):
                out[row, k, o] = weight * fn(snapshot)
    return out


def run_ensemble(
    cfg: SimConfig,
    p: ModelParams,
    init,
    observables: dict[str, Callable[[JointState], float]],
    check: bool = False,
    workers: int = 1,
) -> list[MomentRecord]:
    """Ensemble moment curves: one MomentRecord per (record time, observable).

    Members are independent trajectories with per-member streams keyed
    by (seed, member index); weighted means use the raw importance
    estimator (unbiased when the initial density integrates to one).
    With workers > 1, members are processed in index blocks by a
    process pool and re-assembled in index order, so results and any
    downstream CSV are identical to a serial run.
    """
    if not observables:
        raise ConfigError("need at least one observable")
    names = list(observables)
    obs_fns = [observables[k] for k in names]
    values = np.empty((cfg.ensemble, len(cfg.record_times), len(names)))
    if workers <= 1 or cfg.ensemble < 2 * workers:
        values[:] = _member_rows(range(cfg.ensemble), cfg, p, init, obs_fns, check)
    else:
        from concurrent.futures import ProcessPoolExecutor

        blocks = np.array_split(np.arange(cfg.ensemble), workers)
        ranges = [range(int(b[0]), int(b[-1]) + 1) for b in blocks if b.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_member_rows, r, cfg, p, init, obs_fns, check)
                for r in ranges
            ]
            for r, fut in zip(ranges, futures):
                values[r.start : r.stop] = fut.result()

    records = []
    for k, tau in enumerate(cfg.record_times):
        for o, name in enumerate(names):
            col = values[:, k, o]
            se = float(col.std(ddof=1) / sqrt(cfg.ensemble)) if cfg.ensemble > 1 else 0.0
            records.append(
                MomentRecord(
                    time=float(tau),
                    observable=name,
                    mean=float(col.mean()),
                    std_error=se,
                    n_samples=cfg.ensemble,
                )
            )
    return records


def hermite_observable(coeffs: HermiteCoeffs, p: ModelParams) -> Callable[[JointState], float]:
    """Pointwise evaluator of a Hermite polynomial as an observable.

    Accepts coefficients over the system velocities (3M variables) or
    the full state (3(M+N) variables) and closes over that choice.
    """
    nv = coeffs.basis.nvars
    if nv == 3 * p.m:
        def fn(s: JointState) -> float:
            return float(coeffs.evaluate(s.v.reshape(1, -1))[0])
    elif nv == 3 * (p.m + p.n):
        def fn(s: JointState) -> float:
            return float(coeffs.evaluate(s.flatten()[None, :])[0])
    else:
        raise StateError(
            f"observable must live on {3 * p.m} or {3 * (p.m + p.n)} variables, got {nv}"
        )
    return fn
