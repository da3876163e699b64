"""Local stiffness estimation and eigenscrew decomposition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .screw import DELTA, InvalidInputError, Pose, ScrewVector, canonical_sign, raw_pitch, wrench_pitch

ALPHA_MIN = 1e-3


class LowSignalError(RuntimeError):
    """Probe wrench differences are buried in sensor noise."""


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Eigenscrew:
    e: np.ndarray               # unit 6-vector, sign-canonical
    lam: float
    pitch_raw: float
    pitch_w: float
    # "pencil": K e = lam Delta e;  "free": null-space axis (lam = 0);
    # "reduced": Klein-degenerate remainder, lam is the plain stiffness e^T K e;
    # "axis": principal stiffness axis or externally supplied eigendata
    kind: str = "pencil"

    @classmethod
    def from_vector(cls, e, lam, kind="pencil", pitch_w=None):
        e = np.asarray(e, dtype=float)
        e = canonical_sign(e / np.linalg.norm(e))
        pw = wrench_pitch(e) if pitch_w is None else float(pitch_w)
        return cls(e, float(lam), raw_pitch(e), pw, kind)

    @property
    def screw(self) -> ScrewVector:
        return ScrewVector.from_array(self.e)


@dataclass
class Constraint:
    screws: list
    sample_count: int = 1
    # running mean of the stiffness matrices that produced the screws
    stiffness: np.ndarray | None = None


def _as_stiffness(K, sym_tol=1e-8):
    K = np.asarray(K, dtype=float)
    if K.shape != (6, 6) or not np.all(np.isfinite(K)):
        raise InvalidInputError("stiffness must be a finite 6x6 matrix")
    scale = max(1.0, float(np.abs(K).max()))
    if np.abs(K - K.T).max() > sym_tol * scale:
        raise InvalidInputError("stiffness matrix is not symmetric")
    return 0.5 * (K + K.T)


def _sort_key(s: Eigenscrew):
    return (-float(f"{abs(s.lam):.10g}"), tuple(np.round(s.e, 10)))


def eigenscrew_decompose(K) -> list:
    """Solve ``K e = lam Delta e`` and return six eigenscrews, largest |lam| first.

    For positive definite K the pencil is definite and all six eigenvalues are
    real (three positive, three negative). Null-space directions of a
    semidefinite K are returned as free screws with ``lam = 0``.
    """
    K = _as_stiffness(K)
    w, V = np.linalg.eigh(K)
    scale = float(np.abs(w).max())
    if scale == 0.0:
        return sorted((Eigenscrew.from_vector(V[:, i], 0.0, "free") for i in range(6)), key=_sort_key)
    tol = 1e-9 * scale
    null = np.abs(w) <= tol

    if np.all(w > tol):
        mu, X = scipy.linalg.eigh(DELTA, K)
        out = [Eigenscrew.from_vector(X[:, i], 1.0 / mu[i]) for i in range(6)]
    elif np.all(w[~null] > 0):
        out = _semidefinite(K, w, V, null, tol)
    else:
        out = _indefinite(K, scale)
    return sorted(out, key=_sort_key)


def _semidefinite(K, w, V, null, tol):
    out = [Eigenscrew.from_vector(V[:, i], 0.0, "free") for i in np.flatnonzero(null)]
    S = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    vals, Z = np.linalg.eigh(S @ DELTA @ S)
    keep = np.abs(vals) > tol
    found = [DELTA @ S @ Z[:, i] for i in np.flatnonzero(keep)]
    out += [Eigenscrew.from_vector(e, lam) for e, lam in zip(found, vals[keep])]
    if len(out) < 6:
        # pencil is defective on what is left: fall back to plain stiffness axes
        basis = np.column_stack([s.e for s in out])
        P = scipy.linalg.null_space(basis.T)
        kc, Y = np.linalg.eigh(P.T @ K @ P)
        out += [Eigenscrew.from_vector(P @ Y[:, i], kc[i], "reduced") for i in range(P.shape[1])]
    return out


def _indefinite(K, scale):
    vals, vecs = np.linalg.eig(DELTA @ K)
    if np.abs(vals.imag).max() > 1e-8 * scale:
        raise DecompositionError("indefinite stiffness gives complex eigenscrews")
    return [Eigenscrew.from_vector(vecs[:, i].real, vals[i].real) for i in range(6)]


def principal_axes(K) -> list:
    """Symmetric eigen-axes of K itself, as screws ready for classification.

    Unlike the eigenscrew pencil these separate translational (N/m) and
    rotational (N m/rad) stiffness whenever the two blocks differ in scale,
    which is what the axis classification thresholds assume.
    """
    K = _as_stiffness(K)
    w, V = np.linalg.eigh(K)
    return sorted((Eigenscrew.from_vector(V[:, i], w[i], "axis") for i in range(6)), key=_sort_key)


def pencil_residual(K, s: Eigenscrew) -> float:
    return float(np.linalg.norm(K @ s.e - s.lam * DELTA @ s.e))


def reconstruct(screws) -> np.ndarray:
    """Sum of screw springs ``lam (De)(De)^T / (e^T D e)``; free screws add nothing."""
    K = np.zeros((6, 6))
    for s in screws:
        if s.lam == 0:
            continue
        de = DELTA @ s.e
        K += s.lam * np.outer(de, de) / (s.e @ de)
    return K


# ---------------------------------------------------------------------------

def _wrench_vec(w):
    return w.as_array() if hasattr(w, "as_array") else np.asarray(w, dtype=float)


def probe_stiffness(wrench_source, z: Pose, eps=5e-4, dt=0.4, repeats=1, noise_floor=0.0):
    """Estimate K at ``z`` from wrench readings at +/- basis perturbations.

    Each probe is the basis twist ``eps`` held for ``dt`` seconds, i.e. a
    displacement of ``eps * dt`` (m or rad). ``repeats`` readings are
    averaged per probe.
    """
    if not eps > 0 or not dt > 0:
        raise InvalidInputError("eps and dt must be positive")
    h = eps * dt
    K = np.zeros((6, 6))
    biggest = 0.0
    for j in range(6):
        d = np.zeros(6)
        d[j] = h
        wp = np.mean([_wrench_vec(wrench_source(z.displaced(d))) for _ in range(repeats)], axis=0)
        wm = np.mean([_wrench_vec(wrench_source(z.displaced(-d))) for _ in range(repeats)], axis=0)
        dw = wp - wm
        biggest = max(biggest, float(np.abs(dw).max()))
        K[:, j] = -dw / (2 * h)
    # a difference of two readings has std sqrt(2) * floor; 5 sigma clears the max of 36 such
    if noise_floor > 0 and biggest < 5 * math.sqrt(2) * noise_floor / math.sqrt(repeats):
        raise LowSignalError(f"probe signal {biggest:.3g} below noise floor {noise_floor:.3g}")
    return 0.5 * (K + K.T)


def characteristic_stiffness(K):
    K = np.asarray(K, dtype=float)
    return float(np.linalg.norm(K[:3, :3])), float(np.linalg.norm(K[3:, 3:]))


def alpha(k_x, k_th, alpha_min=ALPHA_MIN):
    """Length per radian giving equal elastic energy: sqrt(k_th / k_x)."""
    if not k_x > 0:
        raise InvalidInputError("translational stiffness must be positive")
    if k_th <= 0:
        return alpha_min
    return math.sqrt(k_th / k_x)
