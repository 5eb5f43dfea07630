"""Conditional laws of exit times from mixture processes.

All functions take a model, a scenario (or an already resolved
:class:`~phasemix.inference.Conditioning`) and evaluation points ``s >= t``
where ``t`` is the scenario time.  Moments and transforms refer to the
remaining times ``tau - t``; at ``t = 0`` they are the moments of ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import matcore
from .errors import ShapeError, StructureMismatchError
from .inference import Conditioning, condition
from .matcore import DEFAULT_TOLERANCES, Tolerances
from .model import ClosedSetFamily, MixtureModel, StructuredBlocks

__all__ = [
    "DensityValue",
    "DensityDecomposition",
    "surv_uni",
    "dens_uni",
    "laplace_uni",
    "moment_uni",
    "surv_multi",
    "dens_multi",
    "dens_biv",
    "dens_biv_points",
    "singular_surv_biv",
    "singular_condition",
    "laplace_biv",
    "cross_moment",
    "structured_dens_biv",
    "structured_marginal",
]

AC1, AC2, DIAGONAL, ATOM = "AC1", "AC2", "Diagonal", "Atom"


@dataclass(frozen=True)
class DensityValue:
    """Density of a univariate exit time at a point plus the atom at ``t``."""

    density: float
    atom: float


@dataclass(frozen=True)
class DensityDecomposition:
    """Value of one component of a bivariate exit law at ``(t1, t2)``.

    ``region`` is ``AC1`` (t1 >= t2 > t, density), ``AC2`` (t2 > t1 > t,
    density), ``Diagonal`` (t1 = t2 > t, density along the diagonal) or
    ``Atom`` (t1 = t2 = t, point mass).
    """

    region: str
    value: float
    atom: float


def _after(c: Conditioning, s: float) -> float:
    u = float(s) - c.time
    if not np.isfinite(u) or u < 0:
        raise ShapeError(f"evaluation time {s} precedes the conditioning time {c.time}")
    return u


def _family(model: MixtureModel, family: ClosedSetFamily):
    if family.n != model.n:
        raise ShapeError(f"closed-set family built for n={family.n}, model has n={model.n}")
    return family


def surv_uni(model: MixtureModel, scenario, s: float) -> float:
    """``P(tau > s | scenario)`` for the absorption time ``tau``."""
    c = condition(model, scenario)
    u = _after(c, s)
    B = model.blocks.B
    return float(sum(v @ matcore.expm(B[k], u).sum(axis=1) for k, v in enumerate(c.regime_weights)))


def dens_uni(model: MixtureModel, scenario, s: float) -> DensityValue:
    c = condition(model, scenario)
    u = _after(c, s)
    bl = model.blocks
    d = sum(v @ matcore.expm(bl.B[k], u) @ bl.exit[k] for k, v in enumerate(c.regime_weights))
    return DensityValue(float(d), c.atom)


def laplace_uni(model: MixtureModel, scenario, lam: float) -> float:
    """``E[exp(-lam (tau - t))]``, atom included."""
    if lam < 0:
        raise ShapeError("the transform is evaluated at lam >= 0")
    c = condition(model, scenario)
    bl = model.blocks
    n = model.n
    out = c.atom
    for k, v in enumerate(c.regime_weights):
        out += v @ matcore.solve(lam * np.eye(n) - bl.B[k], bl.exit[k])
    return float(out)


def moment_uni(model: MixtureModel, scenario, order: int) -> float:
    """``E[(tau - t)^order]``."""
    if order < 0 or int(order) != order:
        raise ShapeError("moment order must be a non-negative integer")
    c = condition(model, scenario)
    if order == 0:
        return float(c.weight.sum() + c.atom)
    out = 0.0
    for k, v in enumerate(c.regime_weights):
        x = np.ones(model.n)
        for _ in range(order):
            x = matcore.solve(model.blocks.B[k], x)
        out += v @ x
    return float((-1) ** order * math.factorial(order) * out)


def _ordered(times: Sequence[float], p: int):
    times = np.asarray(times, dtype=float)
    if times.shape != (p,):
        raise ShapeError(f"expected {p} times, got {times.shape}")
    return times, np.argsort(times, kind="stable")


def surv_multi(model: MixtureModel, scenario, family: ClosedSetFamily, times) -> float:
    """``P(tau_1 > t_1, ..., tau_p > t_p | scenario)`` for first entries into the closed sets."""
    _family(model, family)
    c = condition(model, scenario)
    times, order = _ordered(times, family.p)
    for s in times:
        _after(c, s)
    B, H = model.blocks.B, family.H
    total = 0.0
    for k, v in enumerate(c.regime_weights):
        prev = c.time
        for l in order:
            v = (v @ matcore.expm(B[k], times[l] - prev)) * H[l]
            prev = times[l]
        total += v.sum()
    return float(total)


def dens_multi(model: MixtureModel, scenario, family: ClosedSetFamily, times) -> float:
    """Joint density of ``(tau_1..tau_p)`` at distinct points strictly after ``t``."""
    _family(model, family)
    c = condition(model, scenario)
    times, order = _ordered(times, family.p)
    srt = times[order]
    if srt[0] <= c.time or np.any(np.diff(srt) <= 0):
        raise ShapeError("joint density is evaluated at distinct times strictly after t")
    B, H = model.blocks.B, family.H
    total = 0.0
    for k, v in enumerate(c.regime_weights):
        prev = c.time
        for l in order[:-1]:
            Hl = np.diag(H[l])
            v = v @ matcore.expm(B[k], times[l] - prev) @ matcore.commutator(B[k], Hl)
            prev = times[l]
        last = order[-1]
        v = v @ matcore.expm(B[k], times[last] - prev) @ B[k]
        total += v @ H[last]
    return float((-1) ** family.p * total)


def _biv_parts(model: MixtureModel, family: ClosedSetFamily):
    if family.p != 2:
        raise ShapeError(f"bivariate laws need two closed sets, got {family.p}")
    _family(model, family)
    H1, H2 = np.diag(family.H[0]), np.diag(family.H[1])
    parts = []
    for B in model.blocks.B:
        C1 = matcore.commutator(B, H1)
        C2 = matcore.commutator(B, H2)
        parts.append(
            {
                "B": B,
                "C1": C1,
                "C2": C2,
                # row vectors closing each region's product
                "end1": B @ family.H[0],
                "end2": B @ family.H[1],
                "diag": (C2 @ H1 + C1 @ H2 - B @ H2 @ H1).sum(axis=1),
            }
        )
    return parts


def _biv_atom(c: Conditioning, family: ClosedSetFamily) -> float:
    return float(1.0 - c.weight @ (family.H[0] * family.H[1]))


def dens_biv(model: MixtureModel, scenario, family: ClosedSetFamily, t1: float, t2: float) -> DensityDecomposition:
    """Component of the joint law of ``(tau_1, tau_2)`` at ``(t1, t2)``.

    The absolutely continuous parts are evaluated by their continuous
    extension up to the boundary ``min(t1, t2) = t``.
    """
    c = condition(model, scenario)
    values, regions = dens_biv_points(model, c, family, [t1], [t2])
    atom = _biv_atom(c, family)
    return DensityDecomposition(str(regions[0]), float(values[0]), atom)


def dens_biv_points(model: MixtureModel, scenario, family: ClosedSetFamily, t1, t2, diagonal: str = "singular"):
    """Vectorised :func:`dens_biv` over paired points.

    Returns ``(values, regions)``.  Points with ``t1 == t2 > t`` give the
    diagonal density when ``diagonal="singular"`` and the continuous
    extension of the first absolutely continuous part when
    ``diagonal="ac"``.  Matrix exponentials are cached per distinct
    time offset, so sheared or regular grids cost one exponential per
    offset instead of per point.
    """
    c = condition(model, scenario)
    parts = _biv_parts(model, family)
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    if t1.shape != t2.shape:
        raise ShapeError("t1 and t2 must have the same shape")
    u1 = t1 - c.time
    u2 = t2 - c.time
    if np.any(~np.isfinite(u1)) or np.any(~np.isfinite(u2)) or min(u1.min(), u2.min()) < 0:
        raise ShapeError("joint law is evaluated at points with t1, t2 >= t")
    atom = _biv_atom(c, family)

    region = np.where(t1 >= t2, AC1, AC2).astype(object)
    on_diag = t1 == t2
    if diagonal == "singular":
        region[on_diag] = DIAGONAL
        region[on_diag & (u1 == 0)] = ATOM
    elif diagonal != "ac":
        raise ShapeError("diagonal must be 'singular' or 'ac'")

    first = np.minimum(u1, u2)
    gap = np.abs(u1 - u2)
    values = np.zeros(t1.shape)
    for k, part in enumerate(parts):
        cache: dict = {}

        def E(x):
            e = cache.get(x)
            if e is None:
                e = cache[x] = matcore.expm(part["B"], x)
            return e

        v = c.regime_weights[k]
        firsts, inv_first = np.unique(first, return_inverse=True)
        gaps, inv_gap = np.unique(gap, return_inverse=True)
        lead = np.array([v @ E(x) for x in firsts])  # (F, n)
        mid1 = lead @ part["C2"]
        mid2 = lead @ part["C1"]
        tail1 = np.array([E(x) @ part["end1"] for x in gaps])  # (G, n)
        tail2 = np.array([E(x) @ part["end2"] for x in gaps])
        f1 = np.einsum("ij,ij->i", mid1[inv_first], tail1[inv_gap])
        f2 = np.einsum("ij,ij->i", mid2[inv_first], tail2[inv_gap])
        fd = lead[inv_first] @ part["diag"]
        values += np.where(region == AC1, f1, 0.0)
        values += np.where(region == AC2, f2, 0.0)
        values += np.where(region == DIAGONAL, fd, 0.0)
    values[region == ATOM] = atom
    return values, region


def singular_surv_biv(model: MixtureModel, scenario, family: ClosedSetFamily, t1: float) -> float:
    """Mass of the diagonal component beyond ``t1``: ``P(tau_1 = tau_2 > t1)``."""
    c = condition(model, scenario)
    u = _after(c, t1)
    total = 0.0
    for k, part in enumerate(_biv_parts(model, family)):
        x = matcore.solve(part["B"], part["diag"])
        total -= c.regime_weights[k] @ matcore.expm(part["B"], u) @ x
    return float(total)


def singular_condition(
    model: MixtureModel, family: ClosedSetFamily, tol: Tolerances = DEFAULT_TOLERANCES
) -> list:
    """Per regime: ``True`` when simultaneous exit has zero probability.

    Equivalent to a zero exit rate into the absorbing state from every
    transient state outside both closed sets.
    """
    out = []
    for part in _biv_parts(model, family):
        scale = max(1.0, np.abs(part["B"]).max())
        out.append(bool(np.abs(part["diag"]).max() <= tol.structure * scale))
    return out


def laplace_biv(model: MixtureModel, scenario, family: ClosedSetFamily, lam1: float, lam2: float) -> float:
    """``E[exp(-lam1 (tau_1 - t) - lam2 (tau_2 - t))]`` over all components."""
    if lam1 < 0 or lam2 < 0:
        raise ShapeError("the transform is evaluated at non-negative arguments")
    c = condition(model, scenario)
    n = model.n
    I = np.eye(n)
    H1, H2 = family.H
    total = _biv_atom(c, family)
    for k, part in enumerate(_biv_parts(model, family)):
        B = part["B"]
        r1 = part["C2"] @ matcore.solve(lam1 * I - B, part["end1"])
        r2 = part["C1"] @ matcore.solve(lam2 * I - B, part["end2"])
        inner = r1 + r2 + part["diag"]
        total += c.regime_weights[k] @ matcore.solve((lam1 + lam2) * I - B, inner)
    return float(total)


def cross_moment(model: MixtureModel, scenario, family: ClosedSetFamily) -> float:
    """``E[(tau_1 - t)(tau_2 - t)]``."""
    if family.p != 2:
        raise ShapeError(f"cross moment needs two closed sets, got {family.p}")
    c = condition(model, scenario)
    H1, H2 = family.H
    ones = np.ones(model.n)
    total = 0.0
    for k, B in enumerate(model.blocks.B):
        a = matcore.solve(B, H1 * matcore.solve(B, H2 * ones))
        b = matcore.solve(B, H2 * matcore.solve(B, H1 * ones))
        total += c.regime_weights[k] @ (a + b)
    return float(total)


# -- two regimes with block-structured generators ------------------------------


def _structured_weights(sb: StructuredBlocks, scenario):
    c = condition(sb.model, scenario)
    # regime 1 carries the B blocks, regime 0 the A blocks
    return c, c.weight * c.switching[1], c.weight * c.switching[0]


def structured_dens_biv(sb: StructuredBlocks, scenario, t1: float, t2: float) -> DensityDecomposition:
    """Bivariate law from the sub-blocks of the two regimes."""
    c, wb, wa = _structured_weights(sb, scenario)
    s1, s2, s3 = sb.slices()
    u1 = _after(c, t1)
    u2 = _after(c, t2)
    atom = float(1.0 - c.weight[s1].sum())
    if u1 == u2 == 0:
        return DensityDecomposition(ATOM, atom, atom)
    total = 0.0
    for w, blk in ((wb, sb.B), (wa, sb.A)):
        v = w[s1]
        if u1 == u2:
            total -= v @ matcore.expm(blk["11"], u1) @ (blk["11"].sum(1) + blk["12"].sum(1) + blk["13"].sum(1))
        elif u1 > u2:
            total -= v @ matcore.expm(blk["11"], u2) @ blk["13"] @ matcore.expm(blk["33"], u1 - u2) @ blk["33"].sum(1)
        else:
            total -= v @ matcore.expm(blk["11"], u1) @ blk["12"] @ matcore.expm(blk["22"], u2 - u1) @ blk["22"].sum(1)
    region = DIAGONAL if u1 == u2 else (AC1 if u1 > u2 else AC2)
    return DensityDecomposition(region, float(total), atom)


def structured_marginal(sb: StructuredBlocks, scenario, which: int, s: float) -> float:
    """Density of ``tau_which`` at ``s`` from the composed sub-blocks."""
    if which not in (1, 2):
        raise StructureMismatchError("which must be 1 or 2")
    c, wb, wa = _structured_weights(sb, scenario)
    u = _after(c, s)
    keep = sb.complement_states(which)
    total = 0.0
    for k, w in ((1, wb), (0, wa)):
        G = sb.marginal_generator(k, which)
        total -= w[keep] @ matcore.expm(G, u) @ G.sum(axis=1)
    return float(total)
