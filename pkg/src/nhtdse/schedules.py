"""Model zoo: named Hamiltonian schedule families used by the CLI and the
test suites.

Every family is a pure function of explicit parameters (plus an optional
seed), so scenarios are reproducible from their configuration alone.
"""

from __future__ import annotations

import numpy as np

from .engine import HamiltonianSchedule, _SegmentEvaluator

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def constant_schedule(h, t_span) -> HamiltonianSchedule:
    """Time-independent Hamiltonian."""
    h = np.asarray(h, dtype=complex)
    return HamiltonianSchedule(dim=h.shape[0], h_of_t=lambda t: h,
                               t_span=tuple(t_span))


def hermitian_twolevel(omega: float = 1.0, drive: float = 0.4,
                       t_span=(0.0, 10.0)) -> HamiltonianSchedule:
    """Smooth hermitian two-level schedule (a driven qubit)."""

    def h_of_t(t):
        return (PAULI_X + drive * np.sin(omega * t) * PAULI_Z).astype(complex)

    return HamiltonianSchedule(dim=2, h_of_t=h_of_t, t_span=tuple(t_span))


def diag_complex(energies, t_span=(0.0, 5.0)) -> HamiltonianSchedule:
    """Diagonal Hamiltonian with constant complex eigenvalues: the metric is
    the identity at all times and the component dynamics have the closed
    form |c_n(0)|^2 exp(2 Im(E_n) t) / A(t)."""
    e = np.asarray(energies, dtype=complex)
    h = np.diag(e)
    return HamiltonianSchedule(dim=e.size, h_of_t=lambda t: h,
                               t_span=tuple(t_span))


def pt_symmetric_twolevel(gamma: float = 0.4, coupling: float = 1.0,
                          t_span=(0.0, 10.0),
                          drive: float = 0.0,
                          omega: float = 0.7) -> HamiltonianSchedule:
    """Two-level gain/loss schedule with real spectrum while
    |gamma| < |coupling| (unbroken regime): H = i*gamma*sigma_z + c*sigma_x,
    optionally with a slow drive on the coupling."""
    if abs(gamma) >= abs(coupling):
        raise ValueError("unbroken regime requires |gamma| < |coupling|")

    def h_of_t(t):
        c = coupling * (1.0 + drive * np.sin(omega * t))
        return 1j * gamma * PAULI_Z + c * PAULI_X

    return HamiltonianSchedule(dim=2, h_of_t=h_of_t, t_span=tuple(t_span))


def piecewise_constant(h_before, h_after, t_quench: float,
                       t_span) -> HamiltonianSchedule:
    """Two constant Hamiltonians joined by a declared quench."""
    h0 = np.asarray(h_before, dtype=complex)
    h1 = np.asarray(h_after, dtype=complex)
    if h0.shape != h1.shape:
        raise ValueError("pre- and post-quench shapes differ")

    def h_of_t(t):
        return h1 if t >= t_quench else h0

    return HamiltonianSchedule(dim=h0.shape[0], h_of_t=h_of_t,
                               t_span=tuple(t_span),
                               quench_times=(t_quench,))


def random_smooth_nh(rng: np.random.Generator, dim: int = 2,
                     t_span=(0.0, 10.0), scale: float = 0.6,
                     nh_scale: float = 0.25,
                     max_metric_cond: float = 3e3,
                     min_eigengap: float = 0.08) -> HamiltonianSchedule:
    """Random smooth non-hermitian schedule, filtered to stay comfortably
    away from exceptional points on its whole span.

    H(t) = H0 + H1 sin(w1 t + p1) + H2 cos(w2 t + p2) where each Hk is a
    random hermitian matrix plus an anti-hermitian part of size
    ``nh_scale``.  Draws are retried until, on a fine scan grid, the
    eigenvector condition number stays below ``max_metric_cond`` and all
    pairwise eigenvalue gaps stay above ``min_eigengap``.  The gap varies
    at a bounded rate for this family, so the grid bound is a real bound:
    narrow exceptional-point passages between grid nodes cannot hide.
    """

    def draw():
        mats = []
        for _ in range(3):
            g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            herm = 0.5 * (g + g.conj().T)
            g2 = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            anti = 0.5 * (g2 - g2.conj().T)
            mats.append((scale * herm + nh_scale * anti) / np.sqrt(dim))
        w = rng.uniform(0.3, 1.2, size=2)
        ph = rng.uniform(0.0, 2 * np.pi, size=2)
        return mats, w, ph

    for _ in range(500):
        (h0, h1, h2), w, ph = draw()

        def h_of_t(t, _m=(h0, h1, h2), _w=w, _p=ph):
            return (_m[0] + _m[1] * np.sin(_w[0] * t + _p[0])
                    + _m[2] * np.cos(_w[1] * t + _p[1]))

        ts = np.linspace(t_span[0], t_span[1], 1200)
        hs = np.stack([h_of_t(t) for t in ts])
        evals, vecs = np.linalg.eig(hs)
        svals = np.linalg.svd(vecs, compute_uv=False)
        cond2 = float(((svals[..., 0] / svals[..., -1]) ** 2).max())
        diffs = np.abs(evals[:, :, None] - evals[:, None, :])
        diffs += np.eye(dim) * 1e9
        if cond2 < max_metric_cond and float(diffs.min()) > min_eigengap:
            return HamiltonianSchedule(dim=dim, h_of_t=h_of_t,
                                       t_span=tuple(t_span))
    raise RuntimeError("could not draw a well-conditioned schedule")


def smooth_nh_suite(seed: int, count: int = 20, dims=(2, 3, 4, 6, 8),
                    t_span=(0.0, 10.0)) -> list[HamiltonianSchedule]:
    """Deterministic suite of random smooth NH schedules across dimensions."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        dim = dims[k % len(dims)]
        out.append(random_smooth_nh(rng, dim=dim, t_span=t_span))
    return out


def analytic_metric_family(beta0: float = 0.9, rate: float = 0.3,
                           energies=(0.0, 1.0),
                           t_span=(0.0, 4.0)) -> tuple[HamiltonianSchedule, dict]:
    """A 2x2 schedule whose metric is known in closed form.

    The right eigenvectors are the unit columns (1, 0) and
    (cos(beta), sin(beta)) with beta(t) = beta0 - rate * t, so
    W(t) = (V V+)^-1 analytically.  Used to test the finite-difference
    metric derivative against an exact oracle.  Returns the schedule plus a
    dict with closed-form callables ``metric`` and ``metric_deriv``.
    """
    e = np.asarray(energies, dtype=complex)

    def vmat(t):
        b = beta0 - rate * t
        return np.array([[1.0, np.cos(b)], [0.0, np.sin(b)]], dtype=complex)

    def h_of_t(t):
        v = vmat(t)
        return v @ np.diag(e) @ np.linalg.inv(v)

    def metric(t):
        v = vmat(t)
        w = np.linalg.inv(v @ v.conj().T)
        return 0.5 * (w + w.conj().T)

    def metric_deriv(t):
        # d/dt (G^-1) = -G^-1 Gdot G^-1 with G = V V+ in closed form
        b = beta0 - rate * t
        db = -rate
        v = vmat(t)
        vdot = np.array([[0.0, -np.sin(b) * db], [0.0, np.cos(b) * db]],
                        dtype=complex)
        g = v @ v.conj().T
        gdot = vdot @ v.conj().T + v @ vdot.conj().T
        ginv = np.linalg.inv(g)
        return -ginv @ gdot @ ginv

    schedule = HamiltonianSchedule(dim=2, h_of_t=h_of_t, t_span=tuple(t_span))
    return schedule, {"metric": metric, "metric_deriv": metric_deriv}
