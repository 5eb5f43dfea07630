"""Tabulation of bivariate exit laws as CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .distributions import ATOM, DIAGONAL, dens_biv_points
from .errors import ShapeError
from .inference import condition

__all__ = ["GridSpec", "grid_rows", "grid_emit", "fmt"]


def fmt(x: float) -> str:
    """Locale-independent 17-significant-digit text (round-trips a double)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class GridSpec:
    """Evaluation points ``start, start + step, ...`` up to ``stop`` on each axis.

    Defaults to ``[t, t + 8]`` with step ``0.1`` when bounds are omitted.
    """

    step: float = 0.1
    t1_range: tuple | None = None
    t2_range: tuple | None = None

    def axis(self, t: float, which: int) -> np.ndarray:
        rng = self.t1_range if which == 1 else self.t2_range
        lo, hi = (t, t + 8.0) if rng is None else rng
        if not self.step > 0 or hi < lo or lo < t:
            raise ShapeError(f"malformed grid: range [{lo}, {hi}] with step {self.step} and t={t}")
        count = int(np.floor((hi - lo) / self.step + 1e-9)) + 1
        return lo + self.step * np.arange(count)


def grid_rows(model, family, scenario, spec: GridSpec):
    """Rows ``(t1, t2, region, value)``.

    Absolutely continuous values on every grid point in row-major order
    (``t1`` outer), then the diagonal density at the points shared by
    both axes, then the atom at ``(t, t)``.
    """
    c = condition(model, scenario)
    a1 = spec.axis(c.time, 1)
    a2 = spec.axis(c.time, 2)
    T1, T2 = np.meshgrid(a1, a2, indexing="ij")
    ac, regions = dens_biv_points(model, c, family, T1.ravel(), T2.ravel(), diagonal="ac")
    rows = [(x, y, r, v) for x, y, r, v in zip(T1.ravel(), T2.ravel(), regions, ac)]
    shared = np.intersect1d(a1, a2)
    shared = shared[shared > c.time]
    if shared.size:
        dv, _ = dens_biv_points(model, c, family, shared, shared)
        rows += [(x, x, DIAGONAL, v) for x, v in zip(shared, dv)]
    atom = float(1.0 - c.weight @ (family.H[0] * family.H[1]))
    rows.append((c.time, c.time, ATOM, atom))
    return rows


def grid_emit(model, family, scenario, spec: GridSpec) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t1", "t2", "region", "value"])
    for x, y, r, v in grid_rows(model, family, scenario, spec):
        writer.writerow([fmt(x), fmt(y), r, fmt(v)])
    return buf.getvalue()
