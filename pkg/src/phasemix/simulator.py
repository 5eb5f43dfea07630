"""Monte Carlo sampling of mixture-process paths and exit times.

Paths are simulated in vectorised chunks.  Chunk ``c`` draws from a
Philox stream keyed by ``(seed, c)``, so the sample depends only on the
seed and the path count, never on how many threads ran the chunks.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConditioningError, PhasemixError, ShapeError
from .inference import (
    AliveCurrentOnly,
    AliveInitial,
    CurrentOnly,
    InitialAndCurrent,
    InitialOnly,
    NoInformation,
    PathRecord,
)
from .model import ClosedSetFamily, MixtureModel

__all__ = [
    "SimConfig",
    "ExitSample",
    "SampledPath",
    "default_horizon",
    "sample_path",
    "simulate",
    "estimate_surv",
    "estimate_diag_mass",
    "estimate_moment",
    "estimate_cross_moment",
    "accepted",
]

CHUNK = 1 << 16
MIN_ACCEPTANCE = 1e-4


def default_horizon(model: MixtureModel) -> float:
    """Fifty mean holding times of the slowest transient state."""
    rates = -np.diagonal(model.Q[:, : model.n, : model.n], axis1=1, axis2=2)
    slow = rates[rates > 0].min() if np.any(rates > 0) else 1.0
    return 50.0 / slow


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    seed: int = 0
    horizon: float | None = None
    antithetic: bool = False
    threads: int | None = None

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise ShapeError("n_paths must be at least 1")
        if self.horizon is not None and not self.horizon > 0:
            raise ShapeError("horizon must be positive")


@dataclass(frozen=True, eq=False)
class ExitSample:
    """Per-path results of a batch simulation.

    ``exit_times`` has shape ``(p, n_paths)`` with ``inf`` for sets not
    entered before the horizon; ``censored`` flags paths still transient
    at the horizon.  ``state_at`` is the state at the observation time
    (``-1`` when no observation time was requested).
    """

    regime: np.ndarray
    initial: np.ndarray
    exit_times: np.ndarray
    absorption: np.ndarray
    censored: np.ndarray
    state_at: np.ndarray
    observe_at: float | None
    horizon: float

    @property
    def n_paths(self) -> int:
        return self.regime.size


def _rng(seed: int, stream: int) -> np.random.Generator:
    key = np.array([int(seed) % (1 << 64), int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _tables(model: MixtureModel):
    Q = model.Q
    rates = -np.diagonal(Q, axis1=1, axis2=2).copy()
    jumps = np.clip(Q, 0.0, None)
    for k in range(model.m):
        np.fill_diagonal(jumps[k], 0.0)
    totals = jumps.sum(axis=2, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        cum = np.cumsum(np.where(totals > 0, jumps / totals, 0.0), axis=2)
    cum[..., -1] = np.where(totals[..., 0] > 0, 1.0, 0.0)
    return rates, cum


def _draw_start(model: MixtureModel, rng: np.random.Generator, size: int):
    i0 = rng.choice(model.n + 1, size=size, p=model.pi0 / model.pi0.sum())
    u = rng.random(size)
    cum = np.cumsum(model.S0[:, i0], axis=0)
    phi = np.minimum((u[None, :] >= cum).sum(axis=0), model.m - 1)
    return i0, phi


def _simulate_chunk(model, family, gamma_mask, rates, cum, size, rng, horizon, observe_at):
    n = model.n
    p = gamma_mask.shape[0]
    state, phi = _draw_start(model, rng, size)
    initial = state.copy()
    now = np.zeros(size)
    exits = np.where(gamma_mask[:, state], 0.0, np.inf)
    absorption = np.where(state == n, 0.0, np.inf)
    censored = np.zeros(size, dtype=bool)
    state_at = np.full(size, -1, dtype=np.int64)
    if observe_at is not None:
        state_at[state == n] = n
    active = np.nonzero(state != n)[0]
    while active.size:
        s, k = state[active], phi[active]
        r = rates[k, s]
        stuck = r <= 0
        hold = np.full(active.size, np.inf)
        hold[~stuck] = rng.exponential(1.0, size=int((~stuck).sum())) / r[~stuck]
        later = now[active] + hold
        if observe_at is not None:
            seen = (now[active] <= observe_at) & (observe_at < later)
            state_at[active[seen]] = s[seen]
        over = later > horizon
        censored[active[over]] = True
        go = active[~over]
        u = rng.random(go.size)
        nxt = (u[:, None] >= cum[phi[go], state[go]]).sum(axis=1)
        nxt = np.minimum(nxt, n)
        now[go] = later[~over]
        state[go] = nxt
        for l in range(p):
            hit = gamma_mask[l, nxt] & np.isinf(exits[l, go])
            exits[l, go[hit]] = now[go[hit]]
        dead = nxt == n
        absorption[go[dead]] = now[go[dead]]
        if observe_at is not None:
            state_at[go[dead & (now[go] <= observe_at)]] = n
        active = go[~dead]
    return phi, initial, exits, absorption, censored, state_at


def _threads(config: SimConfig) -> int:
    if config.threads is not None:
        return max(1, int(config.threads))
    env = os.environ.get("PHASEMIX_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def simulate(
    model: MixtureModel, family: ClosedSetFamily | None, config: SimConfig, observe_at: float | None = None
) -> ExitSample:
    """Simulate ``config.n_paths`` independent paths up to the horizon."""
    if family is None:
        family = ClosedSetFamily.absorption_only(model.n)
    horizon = config.horizon if config.horizon is not None else default_horizon(model)
    if observe_at is not None and observe_at > horizon:
        raise ShapeError(f"observation time {observe_at} is beyond the horizon {horizon}")
    gamma_mask = np.zeros((family.p, model.n + 1), dtype=bool)
    for l, g in enumerate(family.gamma):
        gamma_mask[l, sorted(g)] = True
    rates, cum = _tables(model)
    total = int(config.n_paths)
    sizes = [min(CHUNK, total - start) for start in range(0, total, CHUNK)]

    def run(c):
        return _simulate_chunk(
            model, family, gamma_mask, rates, cum, sizes[c], _rng(config.seed, c), horizon, observe_at
        )

    workers = min(_threads(config), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    phi, initial, exits, absorption, censored, state_at = (
        np.concatenate([pt[i] for pt in parts], axis=-1) for i in range(6)
    )
    return ExitSample(
        regime=phi, initial=initial, exit_times=exits, absorption=absorption, censored=censored,
        state_at=state_at, observe_at=observe_at, horizon=horizon,
    )


@dataclass(frozen=True)
class SampledPath:
    regime: int
    record: PathRecord
    occupation: np.ndarray
    jumps: np.ndarray


def sample_path(model: MixtureModel, rng: np.random.Generator, horizon: float | None = None) -> SampledPath:
    """One path until absorption or ``horizon``, with its own occupation and jump counters."""
    horizon = default_horizon(model) if horizon is None else float(horizon)
    size = model.n + 1
    state = int(rng.choice(size, p=model.pi0 / model.pi0.sum()))
    phi = int(rng.choice(model.m, p=model.S0[:, state] / model.S0[:, state].sum()))
    Q = model.Q[phi]
    events = [(0.0, state)]
    occupation = np.zeros(size)
    jumps = np.zeros((size, size), dtype=np.int64)
    now = 0.0
    while state != model.n:
        rate = -Q[state, state]
        hold = rng.exponential(1.0 / rate) if rate > 0 else np.inf
        if now + hold >= horizon:
            break
        weights = np.clip(Q[state], 0.0, None)
        weights[state] = 0.0
        nxt = int(rng.choice(size, p=weights / weights.sum()))
        occupation[state] += hold
        jumps[state, nxt] += 1
        now += hold
        state = nxt
        events.append((now, state))
    # an absorbed record ends just after absorption so the last event lies inside it
    end = np.nextafter(now, np.inf) if state == model.n else horizon
    occupation[state] += end - now
    return SampledPath(phi, PathRecord(tuple(events), end), occupation, jumps)


# -- estimators ---------------------------------------------------------------


def accepted(sample: ExitSample, scenario) -> np.ndarray:
    """Mask of paths consistent with a scenario that can be simulated by rejection."""
    t = scenario.time
    if t > 0 and (sample.observe_at is None or sample.observe_at != t):
        raise PhasemixError(f"sample was not observed at the scenario time {t}")
    if isinstance(scenario, NoInformation):
        return np.ones(sample.n_paths, dtype=bool)
    if isinstance(scenario, InitialOnly):
        return sample.initial == scenario.initial
    at = sample.state_at if t > 0 else sample.initial
    alive = sample.absorption > t
    if isinstance(scenario, CurrentOnly):
        return at == scenario.state
    if isinstance(scenario, InitialAndCurrent):
        return (sample.initial == scenario.initial) & (at == scenario.state)
    if isinstance(scenario, AliveCurrentOnly):
        return alive
    if isinstance(scenario, AliveInitial):
        return alive & (sample.initial == scenario.initial)
    raise InfeasibleConditioningError(
        f"{type(scenario).__name__} conditions on a null event and cannot be simulated by rejection"
    )


def _mean(values: np.ndarray):
    count = values.size
    est = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(count)) if count > 1 else float("inf")
    return est, se


def _conditional(model, family, scenario, config, sample):
    if sample is None:
        t = scenario.time
        sample = simulate(model, family, config, observe_at=t if t > 0 else None)
    mask = accepted(sample, scenario)
    rate = mask.mean()
    if rate < MIN_ACCEPTANCE or mask.sum() < 2:
        raise InfeasibleConditioningError(f"acceptance rate {rate:.2e} is below {MIN_ACCEPTANCE:g}")
    return sample, mask


def estimate_surv(model, family, scenario, times, config: SimConfig | None = None, sample: ExitSample | None = None):
    """Empirical ``P(tau_1 > t_1, ..., tau_p > t_p | scenario)`` and its standard error."""
    if family is None:
        family = ClosedSetFamily.absorption_only(model.n)
    sample, mask = _conditional(model, family, scenario, config, sample)
    times = np.asarray(times, dtype=float).reshape(-1, 1)
    if times.shape[0] != sample.exit_times.shape[0]:
        raise ShapeError(f"expected {sample.exit_times.shape[0]} times")
    if np.any(times > sample.horizon):
        raise ShapeError("survival beyond the simulation horizon is not observed")
    hit = np.all(sample.exit_times[:, mask] > times, axis=0)
    return _mean(hit.astype(float))


def _uncensored(sample, mask):
    keep = mask & ~sample.censored
    lost = (mask & sample.censored).sum() / max(mask.sum(), 1)
    if lost > 1e-3:
        warnings.warn(f"{lost:.2%} of paths are censored; moment estimates are biased low", stacklevel=3)
    return keep


def estimate_moment(model, scenario, order: int, config: SimConfig | None = None, sample: ExitSample | None = None):
    """Empirical ``E[(tau - t)^order | scenario]`` for the absorption time."""
    sample, mask = _conditional(model, None, scenario, config, sample)
    keep = _uncensored(sample, mask)
    return _mean(np.maximum(sample.absorption[keep] - scenario.time, 0.0) ** order)


def estimate_cross_moment(model, family, scenario, config: SimConfig | None = None, sample: ExitSample | None = None):
    """Empirical ``E[(tau_1 - t)(tau_2 - t) | scenario]``."""
    sample, mask = _conditional(model, family, scenario, config, sample)
    keep = _uncensored(sample, mask)
    r = np.maximum(sample.exit_times[:, keep] - scenario.time, 0.0)
    return _mean(r[0] * r[1])


def estimate_diag_mass(model, family, config: SimConfig, sample: ExitSample | None = None):
    """Empirical probability that both closed sets are entered by the same jump."""
    if family.p != 2:
        raise ShapeError("diagonal mass is defined for two closed sets")
    if sample is None:
        sample = simulate(model, family, config)
    tau = sample.exit_times
    both = np.isfinite(tau[0]) & (tau[0] == tau[1]) & (tau[0] > 0)
    return _mean(both.astype(float))
