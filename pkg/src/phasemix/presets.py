"""Ready-made models: exponential mixtures, Marshall-Olkin mixtures, birth-death mixtures.

Each builder returns ``(model, family)`` with states already in the block
order expected by :func:`phasemix.model.structured_blocks`.
"""

from __future__ import annotations

import numpy as np

from .model import ClosedSetFamily, MixtureModel

__all__ = ["exponential_mixture", "marshall_olkin_mixture", "birth_death_mixture", "BIRTH_DEATH_DEFAULTS"]


def _three_state(rates_fast, rates_slow, p, shared=0.0, shared_slow=0.0):
    """Two regimes on states (both alive, first component dead, second dead)."""

    def gen(r1, r2, r3):
        return [[-(r1 + r2 + r3), r1, r2], [0.0, -(r2 + r3), 0.0], [0.0, 0.0, -(r1 + r3)]]

    a1, a2 = rates_slow
    b1, b2 = rates_fast
    B = [gen(a1, a2, shared_slow), gen(b1, b2, shared)]
    p = np.asarray(p, dtype=float)
    S = np.array([1.0 - p, p])
    model = MixtureModel.from_phase_generators(B, pi=[1.0, 0.0, 0.0], S=S)
    # state 1: first component failed (tau_1 reached), state 2: second failed
    family = ClosedSetFamily(n=3, gamma=({1, 3}, {2, 3}))
    return model, family


def exponential_mixture(a1=1.0, a2=2.0, b1=0.5, b2=0.25, p=(0.4, 0.5, 0.5)):
    """Mixture of two pairs of independent exponential lifetimes.

    Regime 1 (index 1, probability ``p[0]`` from the start state) has
    rates ``(b1, b2)``; regime 0 has ``(a1, a2)``.  ``tau_1`` and ``tau_2``
    are the two lifetimes.
    """
    return _three_state((b1, b2), (a1, a2), p)


def marshall_olkin_mixture(a=(1.0, 2.0, 0.5), b=(0.5, 0.25, 0.75), p=(0.4, 0.5, 0.5)):
    """Mixture of two Marshall-Olkin bivariate exponentials.

    The third rate of each triple is the common shock killing both
    components at once.
    """
    a1, a2, a3 = a
    b1, b2, b3 = b
    return _three_state((b1, b2), (a1, a2), p, shared=b3, shared_slow=a3)


BIRTH_DEATH_DEFAULTS = {
    "beta1": 2.0, "beta2": 2.0,
    "alpha1": 0.5, "alpha2": 0.5,
    "gamma1": 1.0, "gamma2": 1.0,
    "delta1": 1.0, "delta2": 1.0, "delta3": 1.0,
    "psi": 0.5,
}


def birth_death_mixture(psi=0.5, delta2=1.0, **overrides):
    """Birth-death chain on three levels feeding two failure states.

    Regime 0 runs at the base rates and regime 1 at ``psi`` times them.
    ``tau_1`` and ``tau_2`` are the entry times into the two failure
    states (4 and 5 in 1-based numbering), both of which then drain
    into the absorbing state.
    """
    unknown = set(overrides) - set(BIRTH_DEATH_DEFAULTS)
    if unknown:
        raise KeyError(f"unknown birth-death parameters {sorted(unknown)}")
    r = dict(BIRTH_DEATH_DEFAULTS, **overrides, psi=psi, delta2=delta2)
    be1, be2 = r["beta1"], r["beta2"]
    al1, al2 = r["alpha1"], r["alpha2"]
    g1, g2 = r["gamma1"], r["gamma2"]
    d1, d2, d3 = r["delta1"], r["delta2"], r["delta3"]
    Q = np.array(
        [
            [-be1, be1, 0, 0, 0, 0],
            [al1, -(be2 + al1), be2, 0, 0, 0],
            [0, al2, -(al2 + g1 + g2 + d3), g1, g2, d3],
            [0, 0, 0, -d1, 0, d1],
            [0, 0, 0, 0, -d2, d2],
            [0, 0, 0, 0, 0, 0],
        ],
        dtype=float,
    )
    model = MixtureModel(
        Q=np.array([Q, r["psi"] * Q]),
        pi0=[0.6, 0.3, 0.1, 0.0, 0.0, 0.0],
        S0=np.full((2, 6), 0.5),
    )
    family = ClosedSetFamily(n=5, gamma=({3, 5}, {4, 5}))
    return model, family
