"""Dense linear-algebra kernels: exponentials, solves, spectra, projectors.

State spaces are small (tens of states), so everything works on dense
``float64`` arrays.  The heavy lifting is delegated to LAPACK through
numpy/scipy; this module adds the input checks, the singularity and
spectrum classification rules, and the Lagrange interpolation
coefficients used for long-run limits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, ShapeError, SingularMatrixError, UnsupportedSpectrumError

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "Spectrum",
    "expm",
    "solve",
    "eigen",
    "lagrange_coefficient",
    "commutator",
]


@dataclass(frozen=True)
class Tolerances:
    """Every numerical threshold used by the package, in one place.

    Callers override individual fields with ``dataclasses.replace``.
    """

    # solve: singular if the smallest LU pivot < singular_pivot * ||A||_1
    singular_pivot: float = 1e-12
    # eigen: simple if the minimal pairwise gap > eig_gap * max|lambda|
    eig_gap: float = 1e-8
    # eigen: real if |Im| < eig_imag * max|lambda|
    eig_imag: float = 1e-10
    # eigen: accepted residual ||Av - lambda v|| / ||A||
    eig_residual: float = 1e-8
    # model checks: row sums, probability sums, zero blocks
    structure: float = 1e-12
    # densities are allowed to dip this far below zero
    density_slack: float = 1e-12
    # spectral coefficient counted as zero below this fraction of the largest one
    coefficient: float = 1e-10


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real square matrix and their classification."""

    eigenvalues: np.ndarray
    dominant_index: int
    all_real_and_simple: bool

    @property
    def dominant(self) -> complex:
        return complex(self.eigenvalues[self.dominant_index])

    def real(self) -> np.ndarray:
        """Real parts of the eigenvalues; only meaningful for real spectra."""
        if not self.all_real_and_simple:
            raise UnsupportedSpectrumError(
                "spectrum has repeated or complex eigenvalues: "
                + ", ".join(f"{z:.6g}" for z in self.eigenvalues)
            )
        return self.eigenvalues.real.copy()


def _square(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ShapeError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ShapeError(f"{name} has non-finite entries")
    return A


def expm(A, t: float = 1.0) -> np.ndarray:
    """Return ``exp(A t)``.

    Scaling and squaring with a degree-13 Pade approximant (scipy's
    implementation of the Al-Mohy/Higham algorithm).  ``t == 0`` returns
    the identity exactly.
    """
    A = _square(A)
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise ShapeError(f"time must be finite and non-negative, got {t}")
    if t == 0.0:
        return np.eye(A.shape[0])
    return scipy.linalg.expm(A * t)


def solve(A, B, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Solve ``A X = B`` by pivoted LU, refusing numerically singular ``A``."""
    A = _square(A)
    B = np.asarray(B, dtype=float)
    if B.shape[0] != A.shape[0]:
        raise ShapeError(f"right-hand side has {B.shape[0]} rows, expected {A.shape[0]}")
    norm = np.linalg.norm(A, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivot = np.min(np.abs(np.diag(lu)))
    if norm == 0.0 or pivot < tol.singular_pivot * norm:
        raise SingularMatrixError(
            f"matrix is singular to tolerance (smallest pivot {pivot:.3g}, norm {norm:.3g})"
        )
    return scipy.linalg.lu_solve((lu, piv), B, check_finite=False)


def eigen(A, tol: Tolerances = DEFAULT_TOLERANCES) -> Spectrum:
    """Eigenvalues of ``A`` (LAPACK Hessenberg + Francis double-shift QR)."""
    A = _square(A)
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc

    norm = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    resid = np.linalg.norm(A @ V - V * w, axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
    if np.any(resid > tol.eig_residual * norm):
        raise ConvergenceError(f"eigenpair residual {resid.max():.3g} exceeds tolerance")

    scale = np.max(np.abs(w))
    real = bool(np.all(np.abs(w.imag) < tol.eig_imag * scale)) if scale > 0 else True
    n = len(w)
    if n == 1:
        simple = True
    elif scale == 0:
        simple = False
    else:
        gaps = np.abs(w[:, None] - w[None, :]) + np.diag(np.full(n, np.inf))
        simple = bool(gaps.min() > tol.eig_gap * scale)
    if real:
        w = w.real.astype(complex)
    dominant = int(np.argmax(w.real))
    return Spectrum(eigenvalues=w, dominant_index=dominant, all_real_and_simple=real and simple)


def lagrange_coefficient(A, spectrum: Spectrum, l: int) -> np.ndarray:
    """Lagrange interpolation coefficient ``prod_{j != l} (A - lam_j I) / (lam_l - lam_j)``.

    For a matrix with real simple spectrum this is the spectral projector
    onto the eigenvalue ``lam_l``; ``sum_l exp(lam_l t) L_l = exp(A t)``.
    """
    A = _square(A)
    lam = spectrum.real()
    if len(lam) != A.shape[0]:
        raise ShapeError("spectrum does not belong to this matrix")
    n = A.shape[0]
    eye = np.eye(n)
    out = eye.copy()
    for j, mu in enumerate(lam):
        if j == l:
            continue
        out = out @ (A - mu * eye) / (lam[l] - mu)
    return out


def commutator(A, B) -> np.ndarray:
    """``AB - BA``."""
    A = _square(A)
    B = _square(B, "B")
    if A.shape != B.shape:
        raise ShapeError(f"dimension mismatch {A.shape} vs {B.shape}")
    return A @ B - B @ A
