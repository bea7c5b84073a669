"""Biorthogonal eigensystems of non-hermitian matrices and the metric
operators built from them.

A non-hermitian matrix H has right eigenvectors |n> and left covectors <<n|
with <<n|m> = delta_nm.  All other modules consume the objects constructed
here: the instantaneous metric (sum of the skew projectors |n>><<n|), the
damping-weighted metric connection, and the metric-aware component /
observable evaluations.

Gauge convention
----------------
Right vectors are normalized to unit Euclidean norm and their first
significant component is rotated to be real and positive; left covectors are
the rows of the inverse of the right-vector matrix.  Unit norm pins the scale
freedom (which would otherwise rescale the metric), the phase rotation makes
output deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    Defective,
    DimensionMismatch,
    NonFinite,
    NotPositiveDefinite,
    TrackingLost,
    ZeroState,
)

DEFECT_TOL = 1e-8          # smallest singular value of the eigenvector matrix
TRACK_MIN_OVERLAP = 0.5    # below this, eigenstate continuation is ambiguous
_PHASE_CUTOFF = 1e-12      # relative threshold for "first nonzero" component


@dataclass(frozen=True)
class BiorthoBasis:
    """Eigenvalues with paired right vectors and left covectors.

    ``right[:, n]`` is the n-th right eigenvector, ``left[n, :]`` the n-th
    left covector; ``left @ right == I`` up to roundoff.  Eigenvalues are
    sorted by (real, imaginary) ascending.
    """

    energies: np.ndarray   # (d,) complex
    right: np.ndarray      # (d, d) complex, unit-norm columns
    left: np.ndarray       # (d, d) complex, rows <<n|

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    def biorthonormality_residual(self) -> float:
        """Max-abs deviation of <<n|m> from the identity."""
        d = self.dim
        return float(np.abs(self.left @ self.right - np.eye(d)).max())

    def completeness_residual(self) -> float:
        """Max-abs deviation of sum_n |n><<n| from the identity."""
        d = self.dim
        return float(np.abs(self.right @ self.left - np.eye(d)).max())


@dataclass(frozen=True)
class MetricState:
    """Instantaneous metric, its skew projectors, and the damping-weighted
    connection.

    ``projectors[n]`` is |n>><<n|; ``damping[n]`` is the accumulated integral
    of twice the imaginary part of E_n along the tracked path (zero for a
    purely instantaneous metric); ``w_conn`` weights each projector by
    exp(damping) and ``eta`` is its unique hermitian PD square root.
    """

    w_inst: np.ndarray      # (d, d) hermitian PD
    projectors: np.ndarray  # (d, d, d)
    damping: np.ndarray     # (d,) real
    w_conn: np.ndarray      # (d, d) hermitian PD
    eta: np.ndarray         # (d, d) hermitian PD

    @property
    def dim(self) -> int:
        return self.w_inst.shape[0]


@dataclass(frozen=True)
class WaveState:
    """A state vector at a point in time (hbar = 1 units).

    ``components`` and ``normalizer`` are filled once a metric is available;
    they are the damping-weighted |c_n|^2 and the normalizing factor A.
    """

    psi: np.ndarray
    t: float
    components: np.ndarray | None = None
    normalizer: float | None = None


def _as_square_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def fix_gauge(vectors: np.ndarray) -> np.ndarray:
    """Normalize columns to unit norm and rotate each so that its first
    significant component is real and positive."""
    v = vectors / np.linalg.norm(vectors, axis=0, keepdims=True)
    d = v.shape[1]
    for n in range(d):
        col = v[:, n]
        idx = np.flatnonzero(np.abs(col) > _PHASE_CUTOFF * np.abs(col).max())
        lead = col[idx[0]]
        v[:, n] = col * (np.conj(lead) / np.abs(lead))
    return v


def eig_biortho(H, tol: float = DEFECT_TOL) -> BiorthoBasis:
    """Biorthogonal eigendecomposition of a square complex matrix.

    Parameters
    ----------
    H : array_like, shape (d, d)
        The matrix to decompose.  Need not be hermitian.
    tol : float
        Defectiveness gate: if the smallest singular value of the right
        eigenvector matrix falls at or below ``tol`` the matrix is treated
        as (numerically) defective and ``Defective`` is raised.

    Returns
    -------
    BiorthoBasis
        Eigenvalues sorted by (Re, Im) ascending; unit-norm, phase-fixed
        right vectors; left covectors satisfying <<n|m> = delta_nm.
    """
    a = _as_square_matrix(H, "H")
    if not np.isfinite(a).all():
        raise NonFinite("H contains non-finite entries")

    energies, vecs = np.linalg.eig(a)
    svals = np.linalg.svd(vecs, compute_uv=False)
    if svals[-1] <= tol:
        raise Defective(
            f"right eigenvector matrix is numerically singular "
            f"(smallest singular value {svals[-1]:.3e} <= tol {tol:.3e})"
        )

    order = np.lexsort((energies.imag, energies.real))
    energies = energies[order]
    vecs = fix_gauge(vecs[:, order])

    left = np.linalg.inv(vecs)
    # One Newton refinement drives the biorthonormality residual from
    # eps*cond(vecs) down to its square, which matters near the defect gate.
    resid = np.eye(a.shape[0]) - left @ vecs
    if np.abs(resid).max() > 1e-13:
        left = left + resid @ left
    return BiorthoBasis(energies=energies, right=vecs, left=left)


def _skew_projectors(basis: BiorthoBasis) -> np.ndarray:
    """Stack of |n>><<n| for each eigenstate."""
    ket = basis.left.conj()           # row n -> column vector |n>>
    return np.einsum("ni,nj->nij", ket, basis.left)


def instantaneous_metric(basis: BiorthoBasis) -> MetricState:
    """Metric built from the current eigenbasis alone (no damping history).

    The metric is the Gram matrix of the left covectors, hence hermitian and
    positive-definite for any non-defective input; it collapses to the
    identity when the source matrix is hermitian.
    """
    projectors = _skew_projectors(basis)
    w = basis.left.conj().T @ basis.left
    w = 0.5 * (w + w.conj().T)
    damping = np.zeros(basis.dim)
    return MetricState(
        w_inst=w,
        projectors=projectors,
        damping=damping,
        w_conn=w,
        eta=matrix_sqrt_pd(w),
    )


def track_states(prev: BiorthoBasis, next: BiorthoBasis) -> np.ndarray:
    """Match eigenstates of ``next`` to those of ``prev`` by greedy best
    overlap.

    Returns ``perm`` with ``perm[n]`` the index in ``next`` continuing state
    ``n`` of ``prev``.  Raises ``TrackingLost`` if any assigned overlap
    |<<n_prev|m_next>| falls below 0.5.
    """
    if prev.dim != next.dim:
        raise DimensionMismatch("bases have different dimensions")
    overlap = np.abs(prev.left @ next.right)
    d = prev.dim
    perm = np.full(d, -1, dtype=int)
    work = overlap.copy()
    for _ in range(d):
        n, m = np.unravel_index(np.argmax(work), work.shape)
        if work[n, m] < TRACK_MIN_OVERLAP:
            raise TrackingLost(
                f"best remaining overlap {work[n, m]:.3f} below "
                f"{TRACK_MIN_OVERLAP}"
            )
        perm[n] = m
        work[n, :] = -np.inf
        work[:, m] = -np.inf
    return perm


def metric_connection(
    bases: Sequence[tuple[float, BiorthoBasis]],
    t0: float,
    t: float,
    quadrature: str = "trapezoid",
) -> MetricState:
    """Damping-weighted metric accumulated along a time-indexed basis path.

    ``bases`` must be (time, basis) pairs sorted by time and covering
    [t0, t]; eigenstates are tracked pairwise along the path and each
    projector of the final basis is weighted by exp of the trapezoid
    integral of 2*Im(E_n) along its tracked history.
    """
    if quadrature != "trapezoid":
        raise ValueError(f"unsupported quadrature rule: {quadrature!r}")
    path = [(tt, b) for tt, b in bases if t0 <= tt <= t]
    if not path:
        raise ValueError("no bases inside [t0, t]")
    times = np.array([tt for tt, _ in path])
    if np.any(np.diff(times) <= 0):
        raise ValueError("basis times must be strictly increasing")
    if abs(times[0] - t0) > 1e-12 or abs(times[-1] - t) > 1e-12:
        raise ValueError("bases do not cover [t0, t]")

    d = path[0][1].dim
    # damping[k] accumulates for the state that started as label k at t0;
    # pos[k] is its column index in the current basis.
    damping = np.zeros(d)
    pos = np.arange(d)
    for (ta, ba), (tb, bb) in zip(path[:-1], path[1:]):
        perm = track_states(ba, bb)
        dt = tb - ta
        im_a = ba.energies.imag[pos]
        new_pos = perm[pos]
        im_b = bb.energies.imag[new_pos]
        damping += dt * (im_a + im_b)   # trapezoid of 2*Im(E)
        pos = new_pos

    final = path[-1][1]
    damping_by_index = np.zeros(d)
    damping_by_index[pos] = damping
    return _connection_from(final, damping_by_index)


def _connection_from(basis: BiorthoBasis, damping: np.ndarray) -> MetricState:
    projectors = _skew_projectors(basis)
    w_inst = basis.left.conj().T @ basis.left
    w_inst = 0.5 * (w_inst + w_inst.conj().T)
    w_conn = np.einsum("n,nij->ij", np.exp(damping), projectors)
    w_conn = 0.5 * (w_conn + w_conn.conj().T)
    return MetricState(
        w_inst=w_inst,
        projectors=projectors,
        damping=damping,
        w_conn=w_conn,
        eta=matrix_sqrt_pd(w_conn),
    )


def components(psi, metric: MetricState) -> tuple[np.ndarray, float]:
    """Damping-weighted components |c_n|^2 of a state and the normalizer A.

    |c_n|^2 = <psi| W_n |psi> / A with W_n the damping-weighted projector
    and A the sum of the raw weights, so the components sum to one.
    """
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if v.shape[0] != metric.dim:
        raise DimensionMismatch(
            f"state dim {v.shape[0]} != metric dim {metric.dim}"
        )
    if np.linalg.norm(v) == 0.0:
        raise ZeroState("cannot take components of the zero vector")
    weights = np.einsum("i,nij,j->n", v.conj(), metric.projectors, v).real
    weights = weights * np.exp(metric.damping)
    a = float(weights.sum())
    return weights / a, a


def observable(psi, op, metric: MetricState) -> complex:
    """Metric-aware expectation value (1/A) <psi| eta^+ O eta |psi>.

    Real for hermitian ``op``; invariant under the joint regauging
    eta -> U eta, O -> U O U^+ for unitary U.
    """
    v = np.asarray(psi, dtype=complex).reshape(-1)
    o = _as_square_matrix(op, "observable operator")
    if o.shape[0] != metric.dim or v.shape[0] != metric.dim:
        raise DimensionMismatch(
            f"operator {o.shape}, state {v.shape} incompatible with "
            f"metric dim {metric.dim}"
        )
    if np.linalg.norm(v) == 0.0:
        raise ZeroState("cannot evaluate an observable on the zero vector")
    ev = v.conj() @ metric.eta.conj().T @ o @ metric.eta @ v
    a = (v.conj() @ metric.w_conn @ v).real
    return complex(ev / a)


def matrix_sqrt_pd(m, herm_tol: float = 1e-10) -> np.ndarray:
    """Unique hermitian square root of a hermitian positive-definite matrix,
    via spectral decomposition."""
    a = _as_square_matrix(m, "matrix")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.conj().T).max() > herm_tol * scale:
        raise NotPositiveDefinite("matrix is not hermitian within tolerance")
    evals, evecs = np.linalg.eigh(a)
    if evals[0] <= 0.0:
        raise NotPositiveDefinite(
            f"matrix has non-positive eigenvalue {evals[0]:.3e}"
        )
    root = (evecs * np.sqrt(evals)) @ evecs.conj().T
    return 0.5 * (root + root.conj().T)
