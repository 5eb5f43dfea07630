"""Mixture model definition, admissibility checks and block partitions.

States are 0-based internally and the absorbing state is always the last
index ``n``.  Files and the command line use the 1-based numbering
``1..n+1`` with ``n+1`` standing for the absorbing state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import matcore
from .errors import ModelValidationError, ShapeError, SingularMatrixError, StructureMismatchError
from .matcore import DEFAULT_TOLERANCES, Tolerances

__all__ = [
    "MixtureModel",
    "ClosedSetFamily",
    "PhaseBlocks",
    "StructuredBlocks",
    "Violation",
    "ValidationReport",
    "validate",
    "block_partition",
    "phase_expm",
    "structured_blocks",
    "structured_order",
    "permute_states",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """``m`` Markov jump processes on ``{0..n}`` mixed once at time zero.

    Parameters
    ----------
    Q : array (m, n+1, n+1)
        Intensity matrices of the regimes; the last state is absorbing.
    pi0 : array (n+1,)
        Initial distribution over all states.
    S0 : array (m, n+1)
        Diagonals of the initial switching matrices: ``S0[k, i]`` is the
        probability of regime ``k`` given the initial state ``i``.
    """

    Q: np.ndarray
    pi0: np.ndarray
    S0: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim == 2:
            Q = Q[None]
        if Q.ndim != 3 or Q.shape[1] != Q.shape[2] or Q.shape[1] < 2:
            raise ShapeError(f"Q must have shape (m, n+1, n+1) with n >= 1, got {Q.shape}")
        size = Q.shape[1]
        pi0 = np.asarray(self.pi0, dtype=float)
        S0 = np.asarray(self.S0, dtype=float)
        if S0.ndim == 3:
            S0 = np.array([np.diag(s) for s in S0])
        if pi0.shape != (size,):
            raise ShapeError(f"pi0 must have length {size}, got {pi0.shape}")
        if S0.shape != (Q.shape[0], size):
            raise ShapeError(f"S0 must have shape {(Q.shape[0], size)}, got {S0.shape}")
        for name, arr in (("Q", Q), ("pi0", pi0), ("S0", S0)):
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} has non-finite entries")
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "pi0", _frozen(pi0))
        object.__setattr__(self, "S0", _frozen(S0))

    @property
    def n(self) -> int:
        """Number of transient states."""
        return self.Q.shape[1] - 1

    @property
    def m(self) -> int:
        """Number of regimes."""
        return self.Q.shape[0]

    @property
    def delta(self) -> int:
        """Index of the absorbing state."""
        return self.n

    @property
    def pi(self) -> np.ndarray:
        """Initial distribution restricted to the transient states."""
        return self.pi0[: self.n]

    @cached_property
    def blocks(self) -> "PhaseBlocks":
        return block_partition(self)

    @classmethod
    def from_phase_generators(cls, B: Sequence, pi, S) -> "MixtureModel":
        """Build a model from phase generators ``B^(k)`` (exit = ``-B 1``).

        ``pi`` is over the transient states; ``S`` gives the switching
        diagonals over the transient states (the absorbing entry is
        spread uniformly, it never enters any formula when ``pi_Delta = 0``).
        """
        B = np.asarray(B, dtype=float)
        if B.ndim == 2:
            B = B[None]
        m, n, _ = B.shape
        Q = np.zeros((m, n + 1, n + 1))
        Q[:, :n, :n] = B
        Q[:, :n, n] = -B.sum(axis=2)
        S = np.asarray(S, dtype=float)
        if S.ndim == 3:
            S = np.array([np.diag(s) for s in S])
        S0 = np.concatenate([S, np.full((m, 1), 1.0 / m)], axis=1)
        pi0 = np.concatenate([np.asarray(pi, dtype=float), [0.0]])
        return cls(Q=Q, pi0=pi0, S0=S0)

    def with_regimes(self, Q=None, S0=None, pi0=None) -> "MixtureModel":
        return MixtureModel(
            Q=self.Q if Q is None else Q,
            pi0=self.pi0 if pi0 is None else pi0,
            S0=self.S0 if S0 is None else S0,
        )


@dataclass(frozen=True, eq=False)
class ClosedSetFamily:
    """Stochastically closed sets ``Gamma_1..Gamma_p`` (0-based, absorbing = ``n``)."""

    n: int
    gamma: tuple

    def __post_init__(self):
        sets = tuple(frozenset(int(s) for s in g) for g in self.gamma)
        if not sets:
            raise ShapeError("a closed-set family needs at least one set")
        object.__setattr__(self, "gamma", sets)

    @property
    def p(self) -> int:
        return len(self.gamma)

    @cached_property
    def H(self) -> np.ndarray:
        """Stack of diagonals ``(p, n)``: 1 on the transient states outside each set."""
        H = np.zeros((self.p, self.n))
        for k, g in enumerate(self.gamma):
            for i in range(self.n):
                if i not in g:
                    H[k, i] = 1.0
        H.setflags(write=False)
        return H

    def H_matrix(self, k: int) -> np.ndarray:
        return np.diag(self.H[k])

    @classmethod
    def absorption_only(cls, n: int) -> "ClosedSetFamily":
        """The single set ``{Delta}``: recovers the univariate exit time."""
        return cls(n=n, gamma=({n},))


@dataclass(frozen=True)
class Violation:
    code: str
    location: tuple
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "location": list(self.location), "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()
    warnings: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            lines = "; ".join(v.message for v in self.violations[:5])
            raise ModelValidationError(f"model is not admissible: {lines}", self.violations)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [v.to_dict() for v in self.violations],
            "warnings": [v.to_dict() for v in self.warnings],
        }


def validate(
    model: MixtureModel, family: ClosedSetFamily | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> ValidationReport:
    """List every violated admissibility invariant; an empty report means admissible."""
    eps = tol.structure
    out: list[Violation] = []
    warn: list[Violation] = []
    n, m, d = model.n, model.m, model.delta

    for k in range(m):
        Q = model.Q[k]
        for i in range(n + 1):
            if Q[i, i] > eps:
                out.append(Violation("positive-diagonal", (k, i, i), f"Q[{k}][{i},{i}] = {Q[i, i]} > 0"))
            for j in range(n + 1):
                if i != j and Q[i, j] < -eps:
                    out.append(Violation("negative-rate", (k, i, j), f"Q[{k}][{i},{j}] = {Q[i, j]} < 0"))
            rs = Q[i].sum()
            if abs(rs) > eps * max(1.0, np.abs(Q[i]).max()):
                out.append(Violation("row-sum", (k, i), f"row {i} of Q[{k}] sums to {rs}"))
        if np.any(np.abs(Q[d]) > eps):
            out.append(Violation("absorbing-row", (k, d), f"row of the absorbing state in Q[{k}] is not zero"))

    S = model.S0
    for k in range(m):
        for i in range(n + 1):
            if S[k, i] < -eps or S[k, i] > 1 + eps:
                out.append(Violation("switching-range", (k, i), f"S0[{k}][{i}] = {S[k, i]} outside [0,1]"))
    col = S.sum(axis=0)
    for i in range(n + 1):
        if abs(col[i] - 1.0) > eps:
            out.append(Violation("switching-sum", (i,), f"switching probabilities at state {i} sum to {col[i]}"))

    pi0 = model.pi0
    for i in range(n + 1):
        if pi0[i] < -eps:
            out.append(Violation("initial-negative", (i,), f"pi0[{i}] = {pi0[i]} < 0"))
    if abs(pi0.sum() - 1.0) > eps:
        out.append(Violation("initial-sum", (), f"pi0 sums to {pi0.sum()}"))
    if abs(pi0[d]) > eps:
        out.append(Violation("initial-absorbing", (d,), f"pi0 puts mass {pi0[d]} on the absorbing state"))

    if family is not None:
        if family.n != n:
            out.append(Violation("family-size", (), f"family built for n={family.n}, model has n={n}"))
        else:
            for l, g in enumerate(family.gamma):
                bad = [s for s in g if s < 0 or s > n]
                if bad:
                    out.append(Violation("gamma-range", (l,), f"Gamma_{l} has unknown states {sorted(bad)}"))
                if d not in g:
                    out.append(Violation("gamma-missing-absorbing", (l,), f"Gamma_{l} does not contain the absorbing state"))
            inter = frozenset.intersection(*family.gamma)
            if inter != {d}:
                out.append(
                    Violation("intersection", (), f"intersection of the closed sets is {sorted(inter)}, expected {{{d}}}")
                )
            for k in range(m):
                Q = model.Q[k]
                for l, g in enumerate(family.gamma):
                    for i in g:
                        if not 0 <= i <= n:
                            continue
                        for j in range(n + 1):
                            if j not in g and Q[i, j] > eps:
                                out.append(
                                    Violation(
                                        "not-closed",
                                        (k, l, i, j),
                                        f"Gamma_{l} is not closed under regime {k}: rate {Q[i, j]} from {i} to {j}",
                                    )
                                )
            core = [i for i in range(n) if all(i not in g for g in family.gamma)]
            outside = [i for i in range(n) if pi0[i] > eps and i not in core]
            if outside:
                warn.append(
                    Violation(
                        "initial-outside-core",
                        tuple(outside),
                        "initial mass outside the common complement of the closed sets; "
                        "joint laws then carry mass on the boundary lines",
                    )
                )
    return ValidationReport(tuple(out), tuple(warn))


@dataclass(frozen=True, eq=False)
class PhaseBlocks:
    """Phase generators ``B^(k)`` (leading ``n x n`` blocks) and exit vectors."""

    B: np.ndarray
    exit: np.ndarray

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def n(self) -> int:
        return self.B.shape[1]


def block_partition(model: MixtureModel, tol: Tolerances = DEFAULT_TOLERANCES) -> PhaseBlocks:
    n = model.n
    B = model.Q[:, :n, :n].copy()
    exit_ = -B.sum(axis=2)
    ones = np.ones(n)
    for k in range(model.m):
        try:
            matcore.solve(B[k], ones, tol)
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"phase generator of regime {k} is singular: absorption is not certain"
            ) from exc
        if np.any(exit_[k] < -tol.structure):
            raise ModelValidationError(f"regime {k} has a negative exit rate")
    exit_ = np.where(np.abs(exit_) <= tol.structure, 0.0, exit_)
    return PhaseBlocks(B=_frozen(B), exit=_frozen(exit_))


def phase_expm(blocks: PhaseBlocks, k: int, t: float) -> np.ndarray:
    """``exp(Q^(k) t)`` assembled from the phase block."""
    n = blocks.n
    E = matcore.expm(blocks.B[k], t)
    P = np.zeros((n + 1, n + 1))
    P[:n, :n] = E
    P[:n, n] = 1.0 - E.sum(axis=1)
    P[n, n] = 1.0
    return P


@dataclass(frozen=True, eq=False)
class StructuredBlocks:
    """Sub-blocks of two-regime generators for two overlapping closed sets.

    Transient states are ordered as (both complements | inside Gamma_1
    only | inside Gamma_2 only) and each generator reads
    ``[[X11, X12, X13], [0, X22, 0], [0, 0, X33]]``.  ``regimes[k]`` maps
    the names ``"11", "12", "13", "22", "33"`` to the blocks of regime
    ``k``.  Regime 0 holds the ``A`` blocks and regime 1 the ``B`` blocks;
    the switching diagonal that weights the ``B`` blocks is regime 1's.
    """

    sizes: tuple
    regimes: tuple
    model: MixtureModel = field(repr=False)
    family: ClosedSetFamily = field(repr=False)

    @property
    def A(self) -> dict:
        return self.regimes[0]

    @property
    def B(self) -> dict:
        return self.regimes[1]

    def slices(self):
        n1, n2, n3 = self.sizes
        return slice(0, n1), slice(n1, n1 + n2), slice(n1 + n2, n1 + n2 + n3)

    def marginal_generator(self, k: int, which: int) -> np.ndarray:
        """Generator of the transient states outside ``Gamma_which`` under regime ``k``."""
        b = self.regimes[k]
        other = "33" if which == 1 else "22"
        cross = "13" if which == 1 else "12"
        top = np.hstack([b["11"], b[cross]])
        bottom = np.hstack([np.zeros((b[other].shape[0], b["11"].shape[1])), b[other]])
        return np.vstack([top, bottom])

    def complement_states(self, which: int) -> np.ndarray:
        """Transient indices outside ``Gamma_which`` in block order."""
        s1, s2, s3 = self.slices()
        keep = s3 if which == 1 else s2
        return np.r_[np.arange(s1.start, s1.stop), np.arange(keep.start, keep.stop)]


def structured_order(family: ClosedSetFamily) -> list:
    """Transient states reordered as (core, Gamma_1 only, Gamma_2 only)."""
    if family.p != 2:
        raise StructureMismatchError(f"structured blocks need exactly two closed sets, got {family.p}")
    g1, g2 = family.gamma
    core = [i for i in range(family.n) if i not in g1 and i not in g2]
    only1 = [i for i in range(family.n) if i in g1 and i not in g2]
    only2 = [i for i in range(family.n) if i in g2 and i not in g1]
    return core + only1 + only2


def structured_blocks(
    blocks: PhaseBlocks, family: ClosedSetFamily, model: MixtureModel | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> StructuredBlocks:
    """Split each ``B^(k)`` into the sub-blocks of the two-set pattern."""
    order = structured_order(family)
    if order != list(range(family.n)):
        raise StructureMismatchError(
            f"states are not in block order {[i + 1 for i in order]}; use permute_states first"
        )
    if blocks.m != 2:
        raise StructureMismatchError(f"structured formulas are written for two regimes, got {blocks.m}")
    g1, g2 = family.gamma
    n1 = sum(1 for i in range(family.n) if i not in g1 and i not in g2)
    n2 = sum(1 for i in range(family.n) if i in g1 and i not in g2)
    n3 = family.n - n1 - n2
    s1 = slice(0, n1)
    s2 = slice(n1, n1 + n2)
    s3 = slice(n1 + n2, family.n)
    regimes = []
    for k in range(blocks.m):
        B = blocks.B[k]
        for name, (r, c) in {"21": (s2, s1), "23": (s2, s3), "31": (s3, s1), "32": (s3, s2)}.items():
            if B[r, c].size and np.abs(B[r, c]).max() > tol.structure:
                raise StructureMismatchError(f"regime {k}: block {name} is not zero")
        regimes.append(
            {
                "11": _frozen(B[s1, s1]),
                "12": _frozen(B[s1, s2]),
                "13": _frozen(B[s1, s3]),
                "22": _frozen(B[s2, s2]),
                "33": _frozen(B[s3, s3]),
            }
        )
    if model is None:
        raise StructureMismatchError("structured blocks need the model for conditioning")
    return StructuredBlocks(sizes=(n1, n2, n3), regimes=tuple(regimes), model=model, family=family)


def permute_states(model: MixtureModel, family: ClosedSetFamily | None, order: Sequence[int]):
    """Reorder transient states: new state ``a`` is old state ``order[a]``.

    The absorbing state stays last.  Returns ``(model, family)``.
    """
    n = model.n
    order = [int(i) for i in order]
    if sorted(order) != list(range(n)):
        raise ShapeError(f"order must be a permutation of 0..{n - 1}")
    full = order + [n]
    Q = model.Q[:, full][:, :, full]
    new_model = MixtureModel(Q=Q, pi0=model.pi0[full], S0=model.S0[:, full])
    new_family = None
    if family is not None:
        inverse = {old: new for new, old in enumerate(full)}
        new_family = ClosedSetFamily(n=n, gamma=tuple({inverse[s] for s in g} for g in family.gamma))
    return new_model, new_family
