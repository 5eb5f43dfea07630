"""Regime and state filtering for mixture processes.

Given what has been observed up to time ``t`` (a full path, only the
current state, the initial and current state, or only survival), this
module computes the posterior regime probabilities per state, the
posterior state distribution, their long-run limits and the conditional
transition matrix.  ``condition`` packages a scenario into the weight
vector and switching diagonals consumed by :mod:`phasemix.distributions`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from . import matcore
from .errors import ImpossibleObservationError, PhasemixError, ShapeError, UnsupportedSpectrumError
from .matcore import DEFAULT_TOLERANCES, Tolerances
from .model import MixtureModel

__all__ = [
    "PathRecord",
    "path_stats",
    "log_likelihood",
    "likelihood",
    "FullPath",
    "CurrentOnly",
    "InitialAndCurrent",
    "PastOnlyFull",
    "AliveFull",
    "AliveCurrentOnly",
    "AliveInitial",
    "NoInformation",
    "InitialOnly",
    "Scenario",
    "Conditioning",
    "switching_update",
    "switching_matrix",
    "switching_limit",
    "state_update",
    "state_update_alive",
    "state_limit",
    "transition_matrix",
    "condition",
]


def path_stats(events, t: float, size: int | None = None):
    """Occupation times ``T`` and jump counts ``N`` of a path over ``[0, t)``."""
    events = [(float(s), int(x)) for s, x in events]
    if not events:
        raise ShapeError("a path needs at least its initial state")
    if events[0][0] != 0.0:
        raise ShapeError(f"paths start at time 0, got {events[0][0]}")
    t = float(t)
    states = [x for _, x in events]
    if min(states) < 0:
        raise ShapeError("states are non-negative indices")
    if size is None:
        size = max(states) + 1
    elif max(states) >= size:
        raise ShapeError(f"state {max(states)} outside a space of size {size}")
    T = np.zeros(size)
    N = np.zeros((size, size), dtype=np.int64)
    for (s0, x0), (s1, x1) in zip(events, events[1:]):
        if not s1 > s0:
            raise ShapeError(f"event times must increase strictly: {s0} then {s1}")
        if x0 == x1:
            raise ShapeError(f"self-transition at time {s1} in state {x0}")
        T[x0] += s1 - s0
        N[x0, x1] += 1
    last_time, last_state = events[-1]
    if len(events) > 1 and not last_time < t:
        raise ShapeError(f"event at {last_time} is not before the horizon {t}")
    if t < last_time:
        raise ShapeError(f"horizon {t} precedes the last event")
    T[last_state] += t - last_time
    return T, N


@dataclass(frozen=True)
class PathRecord:
    """An observed trajectory on ``[0, horizon)``: ``events`` are ``(time, state)`` pairs."""

    events: tuple
    horizon: float

    def __post_init__(self):
        events = tuple((float(s), int(x)) for s, x in self.events)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "horizon", float(self.horizon))
        path_stats(events, self.horizon)

    @classmethod
    def from_observations(cls, observations, horizon: float) -> "PathRecord":
        """Build a record from checkpoints, dropping those that repeat the current state."""
        events = []
        for s, x in observations:
            if events and events[-1][1] == int(x):
                continue
            events.append((float(s), int(x)))
        return cls(tuple(events), horizon)

    @property
    def initial_state(self) -> int:
        return self.events[0][1]

    @property
    def last_state(self) -> int:
        """The state occupied just before the horizon."""
        return self.events[-1][1]

    def until(self, t: float) -> "PathRecord":
        """The same path observed on ``[0, t)`` only."""
        if t > self.horizon:
            raise ShapeError(f"cannot extend a record observed up to {self.horizon} to {t}")
        return PathRecord(tuple(e for e in self.events if e[0] < t or e[0] == 0.0), t)

    def state_at(self, t: float) -> int:
        """State occupied at time ``t`` (right-continuous)."""
        return [x for s, x in self.events if s <= t][-1]

    def stats(self, size: int):
        return path_stats(self.events, self.horizon, size)

    def to_dict(self) -> dict:
        return {"events": [[s, x + 1] for s, x in self.events], "horizon": self.horizon}

    @classmethod
    def from_dict(cls, data: dict) -> "PathRecord":
        """Inverse of :meth:`to_dict` (file states are 1-based)."""
        if set(data) != {"events", "horizon"}:
            raise ShapeError("a path file has exactly the keys 'events' and 'horizon'")
        return cls(tuple((s, int(x) - 1) for s, x in data["events"]), data["horizon"])


def log_likelihood(record: PathRecord, Q) -> float:
    """Log-density of the observed path under the generator ``Q``; ``-inf`` if impossible."""
    Q = np.asarray(Q, dtype=float)
    T, N = record.stats(Q.shape[0])
    rates = -np.diag(Q)
    out = -float(rates @ T)
    jumps = np.nonzero(N)
    q = Q[jumps]
    if np.any(q <= 0):
        return -np.inf
    return out + float(N[jumps] @ np.log(q))


def likelihood(record: PathRecord, Q) -> float:
    return float(np.exp(log_likelihood(record, Q)))


# -- information scenarios ----------------------------------------------------
#
# Every scenario has a ``time`` and a ``past()`` describing what is known
# strictly before that time.  F-type scenarios also pin the current state.


@dataclass(frozen=True)
class NoInformation:
    """Nothing observed before ``t``."""

    t: float

    @property
    def time(self) -> float:
        return float(self.t)

    def past(self):
        return self

    def at_state(self, j: int):
        return CurrentOnly(j, self.t)


@dataclass(frozen=True)
class InitialOnly:
    """Only the initial state is known."""

    initial: int
    t: float

    @property
    def time(self) -> float:
        return float(self.t)

    def past(self):
        return self

    def at_state(self, j: int):
        return InitialAndCurrent(self.initial, j, self.t)


@dataclass(frozen=True)
class PastOnlyFull:
    """The whole path on ``[0, t)`` is known; nothing is said about ``X_t``."""

    record: PathRecord

    @property
    def time(self) -> float:
        return self.record.horizon

    def past(self):
        return self

    def at_state(self, j: int):
        return FullPath(self.record, j)


@dataclass(frozen=True)
class CurrentOnly:
    """Only ``X_t = state`` is known."""

    state: int
    t: float

    @property
    def time(self) -> float:
        return float(self.t)

    def past(self):
        return NoInformation(self.t)


@dataclass(frozen=True)
class InitialAndCurrent:
    initial: int
    state: int
    t: float

    @property
    def time(self) -> float:
        return float(self.t)

    def past(self):
        return InitialOnly(self.initial, self.t)


@dataclass(frozen=True)
class FullPath:
    """The path on ``[0, t)`` and ``X_t = state``.

    A current state different from the last recorded one means a jump
    exactly at ``t``.
    """

    record: PathRecord
    state: int

    @property
    def time(self) -> float:
        return self.record.horizon

    def past(self):
        return PastOnlyFull(self.record)


@dataclass(frozen=True)
class AliveCurrentOnly:
    """Only survival up to ``t`` is known."""

    t: float

    @property
    def time(self) -> float:
        return float(self.t)

    def past(self):
        return NoInformation(self.t)

    def at_state(self, j: int):
        return CurrentOnly(j, self.t)


@dataclass(frozen=True)
class AliveInitial:
    initial: int
    t: float

    @property
    def time(self) -> float:
        return float(self.t)

    def past(self):
        return InitialOnly(self.initial, self.t)

    def at_state(self, j: int):
        return InitialAndCurrent(self.initial, j, self.t)


@dataclass(frozen=True)
class AliveFull:
    record: PathRecord

    @property
    def time(self) -> float:
        return self.record.horizon

    def past(self):
        return PastOnlyFull(self.record)

    def at_state(self, j: int):
        return FullPath(self.record, j)


Scenario = Union[
    FullPath, CurrentOnly, InitialAndCurrent, PastOnlyFull, AliveFull,
    AliveCurrentOnly, AliveInitial, NoInformation, InitialOnly,
]

_CURRENT = (FullPath, CurrentOnly, InitialAndCurrent)
_ALIVE = (AliveFull, AliveCurrentOnly, AliveInitial)


def _check_state(model: MixtureModel, j: int, what="state"):
    if not 0 <= j <= model.n:
        raise ShapeError(f"{what} {j} outside 0..{model.n}")


def _check_time(t: float):
    if not np.isfinite(t) or t < 0:
        raise ShapeError(f"time must be finite and non-negative, got {t}")


def _log_joint(model: MixtureModel, past) -> np.ndarray:
    """``log P(past, X_t = j, regime = k)`` as an ``(m, n+1)`` array.

    For a recorded path only the last state has positive probability; the
    other columns hold the log-density of a jump to ``j`` exactly at ``t``
    and are used for regime posteriors only.
    """
    m, size = model.m, model.n + 1
    with np.errstate(divide="ignore"):
        if isinstance(past, NoInformation):
            _check_time(past.time)
            rows = np.array(
                [(model.pi0 * model.S0[k]) @ matcore.expm(model.Q[k], past.time) for k in range(m)]
            )
            return np.log(np.clip(rows, 0.0, None))
        if isinstance(past, InitialOnly):
            _check_time(past.time)
            _check_state(model, past.initial, "initial state")
            i0 = past.initial
            rows = np.array(
                [model.pi0[i0] * model.S0[k, i0] * matcore.expm(model.Q[k], past.time)[i0] for k in range(m)]
            )
            return np.log(np.clip(rows, 0.0, None))
        if isinstance(past, PastOnlyFull):
            rec = past.record
            i0, last = rec.initial_state, rec.last_state
            _check_state(model, last)
            out = np.empty((m, size))
            for k in range(m):
                base = np.log(model.pi0[i0] * model.S0[k, i0]) + log_likelihood(rec, model.Q[k])
                out[k] = base + np.log(np.clip(model.Q[k, last], 0.0, None))
                out[k, last] = base
            return out
    raise PhasemixError(f"unsupported scenario {type(past).__name__}")


def _normalize_columns(logw: np.ndarray) -> np.ndarray:
    """Normalize each column of log-weights over regimes; zero columns stay NaN."""
    top = np.max(logw, axis=0)
    finite = np.isfinite(top)
    w = np.zeros_like(logw)
    w[:, finite] = np.exp(logw[:, finite] - top[finite])
    total = w.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return w / total


def switching_update(model: MixtureModel, scenario) -> np.ndarray:
    """Posterior regime probabilities given a scenario that fixes the current state."""
    if not isinstance(scenario, _CURRENT):
        raise PhasemixError(
            f"{type(scenario).__name__} does not fix the current state; use switching_matrix"
        )
    j = scenario.state
    _check_state(model, j)
    post = _normalize_columns(_log_joint(model, scenario.past()))[:, j]
    if not np.all(np.isfinite(post)):
        raise ImpossibleObservationError(
            f"the observed history ending in state {j} has zero probability under every regime"
        )
    return post


def switching_matrix(model: MixtureModel, scenario) -> np.ndarray:
    """Per-state regime posteriors ``s_j^(k)(t)`` as an ``(m, n+1)`` array.

    Uses only the information before ``t``.  Columns of states that cannot
    be occupied at ``t`` keep the prior switching probabilities.
    """
    post = _normalize_columns(_log_joint(model, scenario.past()))
    bad = ~np.all(np.isfinite(post), axis=0)
    post[:, bad] = model.S0[:, bad]
    return post


def state_update(model: MixtureModel, scenario) -> np.ndarray:
    """Distribution of ``X_t`` over all states given the information before ``t``."""
    past = scenario.past()
    logw = _log_joint(model, past)
    if isinstance(past, PastOnlyFull):
        out = np.zeros(model.n + 1)
        if not np.any(np.isfinite(logw[:, past.record.last_state])):
            raise ImpossibleObservationError("the recorded path has zero probability under every regime")
        out[past.record.last_state] = 1.0
        return out
    w = np.exp(logw).sum(axis=0)
    total = w.sum()
    if not total > 0:
        raise ImpossibleObservationError("the observed history has zero probability under every regime")
    return w / total


def state_update_alive(model: MixtureModel, scenario) -> np.ndarray:
    """Distribution of ``X_t`` over the transient states given survival to ``t``."""
    w = state_update(model, scenario)[: model.n]
    total = w.sum()
    if not total > 0:
        raise ImpossibleObservationError("survival up to t has zero probability")
    return w / total


def _limit_weights(coeffs, eigs, tol: Tolerances):
    """Asymptotic weights from spectral coefficients.

    ``coeffs[k][l]`` multiplies ``exp(eigs[k][l] t)`` in regime ``k``'s
    contribution (scalar or vector).  Returns the leading-order
    coefficient of every regime, zero for regimes that decay faster.
    """
    mags = [np.array([np.abs(c).max() for c in ck]) for ck in coeffs]
    scale = max((mg.max() for mg in mags if mg.size), default=0.0)
    if scale == 0:
        raise ImpossibleObservationError("every regime has zero weight in the limit")
    lead = []
    for ck, lam, mg in zip(coeffs, eigs, mags):
        live = np.nonzero(mg > tol.coefficient * scale)[0]
        lead.append(None if live.size == 0 else max(live, key=lambda l: lam[l]))
    tops = [eigs[k][l] for k, l in enumerate(lead) if l is not None]
    best = max(tops)
    spread = max(abs(x) for e in eigs for x in e) or 1.0
    out = []
    for k, l in enumerate(lead):
        if l is not None and abs(eigs[k][l] - best) <= tol.eig_gap * spread:
            out.append(np.asarray(coeffs[k][l], dtype=float))
        else:
            out.append(None)
    return out


def switching_limit(
    model: MixtureModel, j: int, initial: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Limit of the regime posterior at state ``j`` as ``t`` grows.

    Without ``initial`` the current state alone is observed; with it the
    initial state is known too.  Only regimes whose slowest contributing
    exponential mode is the overall slowest survive; ties share the limit
    in proportion to their leading coefficients.
    """
    _check_state(model, j)
    coeffs, eigs = [], []
    for k in range(model.m):
        Q = model.Q[k]
        spec = matcore.eigen(Q, tol)
        lam = spec.real()
        if initial is None:
            w = model.pi0 * model.S0[k]
        else:
            _check_state(model, initial, "initial state")
            w = np.zeros(model.n + 1)
            w[initial] = model.pi0[initial] * model.S0[k, initial]
        coeffs.append([float(w @ matcore.lagrange_coefficient(Q, spec, l)[:, j]) for l in range(len(lam))])
        eigs.append(lam)
    lead = _limit_weights(coeffs, eigs, tol)
    out = np.array([0.0 if c is None else float(c) for c in lead])
    total = out.sum()
    if not total > 0:
        raise UnsupportedSpectrumError("leading spectral coefficients cancel; limit is not determined")
    return out / total


def state_limit(
    model: MixtureModel, initial: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Limit of the survival-conditioned state distribution (quasi-stationary law)."""
    B = model.blocks.B
    n = model.n
    coeffs, eigs = [], []
    for k in range(model.m):
        spec = matcore.eigen(B[k], tol)
        lam = spec.real()
        if initial is None:
            w = model.pi * model.S0[k, :n]
        else:
            _check_state(model, initial, "initial state")
            w = np.zeros(n)
            if initial < n:
                w[initial] = model.pi0[initial] * model.S0[k, initial]
        coeffs.append([w @ matcore.lagrange_coefficient(B[k], spec, l) for l in range(n)])
        eigs.append(lam)
    lead = _limit_weights(coeffs, eigs, tol)
    vec = sum(c for c in lead if c is not None)
    total = vec.sum()
    if not total > 0:
        raise UnsupportedSpectrumError("leading spectral coefficients cancel; limit is not determined")
    return vec / total


def transition_matrix(model: MixtureModel, scenario, s: float) -> np.ndarray:
    """``P(X_s = j | information before t, X_t = i)`` for all ``i, j``."""
    t = scenario.time
    if s < t:
        raise ShapeError(f"s={s} precedes the conditioning time t={t}")
    S = switching_matrix(model, scenario)
    return sum(S[k][:, None] * matcore.expm(model.Q[k], s - t) for k in range(model.m))


@dataclass(frozen=True, eq=False)
class Conditioning:
    """A scenario reduced to what the exit-time formulas need.

    ``weight`` is the distribution of the current state over the
    transient states (possibly with total mass below one, the rest being
    an atom at ``t``) and ``switching[k]`` holds the per-state regime
    posteriors on the transient states.
    """

    time: float
    weight: np.ndarray
    switching: np.ndarray

    @property
    def atom(self) -> float:
        return float(1.0 - self.weight.sum())

    @cached_property
    def regime_weights(self) -> np.ndarray:
        """``weight * switching[k]`` per regime, shape ``(m, n)``."""
        return self.weight[None, :] * self.switching


def condition(model: MixtureModel, scenario) -> Conditioning:
    if isinstance(scenario, Conditioning):
        return scenario
    n = model.n
    S = switching_matrix(model, scenario)[:, :n]
    if isinstance(scenario, _CURRENT):
        j = scenario.state
        _check_state(model, j)
        S = S.copy()
        w = np.zeros(n)
        if j < n:
            S[:, j] = switching_update(model, scenario)[:]
            w[j] = 1.0
    elif isinstance(scenario, _ALIVE):
        w = state_update_alive(model, scenario)
    else:
        w = state_update(model, scenario)[:n]
    return Conditioning(time=scenario.time, weight=w, switching=S)
