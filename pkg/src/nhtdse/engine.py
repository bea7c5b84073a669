"""Right-hand sides for the non-hermitian Schrodinger-equation variants,
adaptive time integration over piecewise-smooth Hamiltonian schedules, and
the unitarity monitor.

The default variant keeps ``<psi| W(t) |psi>`` constant along smooth
trajectories, where W(t) is the instantaneous metric of H(t).  Declared
discontinuities of the schedule are bridged by the quench module's jump
operator.

Implementation notes
--------------------
With V(t) the unit-norm right-eigenvector matrix of H(t) and G = V V+, the
instantaneous metric is W = G^-1.  The flow only ever needs W v (a hermitian
solve against G), W^-1 v (a product with G), and the combinations involving
dW/dt = -W (dG/dt) W, so no matrix is explicitly inverted while stepping.
dG/dt comes from a five-point finite-difference stencil shifted to stay
inside the current smooth segment.

The embedded Runge-Kutta pair advances the fourth-order solution and uses
the fifth-order one for error control, so the propagated global order is
four.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import quench as quench_mod
from .biortho import (
    BiorthoBasis,
    MetricState,
    WaveState,
    _connection_from,
    components as compute_components,
    fix_gauge,
    matrix_sqrt_pd,
    track_states,
)
from .errors import (
    Defective,
    DimensionMismatch,
    IllConditionedMetric,
    NonFinite,
    QuenchAdjacent,
    StepSizeUnderflow,
    ZeroState,
)

METRIC_COND_LIMIT = 1e12   # gate on cond(W) = cond(V)^2
_EIG_DEFECT_TOL = 1e-8


class TdseVariant(enum.Enum):
    """The five evolution laws the engine can integrate."""

    STANDARD = "standard"   # i dpsi/dt = H psi
    NEW_NH = "new-nh"       # metric-unitary flow (the default)
    LEFT_NH = "left-nh"     # mirrored flow for |Psi>> = W |Psi>
    WIESER = "wieser"       # norm-preserving scalar-shift flow
    GONG = "gong"           # i dpsi/dt = (H - i/2 W^-1 dW/dt) psi

    @classmethod
    def from_name(cls, name: str) -> "TdseVariant":
        for v in cls:
            if v.value == name:
                return v
        raise ValueError(f"unknown TDSE variant {name!r}")


_METRIC_VARIANTS = {TdseVariant.NEW_NH, TdseVariant.LEFT_NH, TdseVariant.GONG}


@dataclass(frozen=True)
class HamiltonianSchedule:
    """Piecewise-smooth time-dependent Hamiltonian with declared jumps.

    ``h_of_t`` must return a (dim, dim) complex array for any t in
    ``t_span`` and must be right-continuous at each quench time (the value
    *at* a quench time is the post-quench matrix; pre-quench limits are
    taken internally).  Optional ``metric_fn`` / ``metric_deriv_fn``
    short-circuit the eigendecomposition path with closed-form W(t) and
    dW/dt in the unit-norm right-eigenvector gauge; they exist for
    constructed test schedules where the metric is known in closed form.
    """

    dim: int
    h_of_t: Callable[[float], np.ndarray]
    t_span: tuple[float, float]
    quench_times: tuple[float, ...] = ()
    metric_fn: Callable[[float], np.ndarray] | None = None
    metric_deriv_fn: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError("t_span must satisfy t1 > t0")
        qs = tuple(sorted(self.quench_times))
        if any(not (t0 < q < t1) for q in qs):
            raise ValueError("quench times must lie strictly inside t_span")
        if any(b - a <= 1e-9 for a, b in zip(qs[:-1], qs[1:])):
            raise ValueError("quench times too close together")
        object.__setattr__(self, "quench_times", qs)

    def segments(self) -> list[tuple[float, float]]:
        """Smooth intervals between consecutive discontinuities."""
        cuts = [self.t_span[0], *self.quench_times, self.t_span[1]]
        return list(zip(cuts[:-1], cuts[1:]))

    def matrix(self, t: float) -> np.ndarray:
        h = np.asarray(self.h_of_t(t), dtype=complex)
        if h.shape != (self.dim, self.dim):
            raise DimensionMismatch(
                f"schedule returned shape {h.shape}, expected "
                f"({self.dim}, {self.dim})"
            )
        if not np.isfinite(h).all():
            raise NonFinite(f"H(t={t}) contains non-finite entries")
        return h


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and step control for :func:`evolve`.

    ``fixed_step`` disables error control and advances with a constant step
    (still landing exactly on quench and output times); it exists for
    convergence-order measurements.  ``fd_step`` is the stencil half-width
    used to differentiate the metric.
    """

    rtol: float = 1e-9
    atol: float = 1e-11
    max_step: float = math.inf
    fixed_step: float | None = None
    fd_step: float = 1e-4
    safety: float = 0.8
    max_steps: int = 2_000_000


@dataclass(frozen=True)
class QuenchRecord:
    t: float
    event: "quench_mod.QuenchEvent"
    psi_minus: np.ndarray
    psi_plus: np.ndarray


@dataclass
class Trajectory:
    """Sampled solution of one evolution run.

    ``samples`` are (times[i], states[i], metrics[i]) with strictly
    increasing times.  ``unitarity_drift`` is the max relative deviation of
    the conserved quadratic form from its initial value, monitored at every
    accepted step (not just at the recorded samples).
    """

    variant: TdseVariant
    times: np.ndarray
    states: list[WaveState]
    metrics: list[MetricState]
    unitarity_drift: float
    accepted_steps: int
    rejected_steps: int
    quench_records: list[QuenchRecord] = field(default_factory=list)

    @property
    def final_state(self) -> WaveState:
        return self.states[-1]


# ---------------------------------------------------------------------------
# finite-difference weights (Fornberg) and the segment evaluator


def _fd_weights_first_derivative(x0: float, nodes: np.ndarray) -> np.ndarray:
    """Weights w with sum_j w_j f(nodes_j) ~= f'(x0), exact for polynomials
    of degree < len(nodes).  Fornberg's recursion, first derivative only."""
    n = len(nodes)
    c = np.zeros((n, 2))
    c[0, 0] = 1.0
    c1 = 1.0
    for i in range(1, n):
        c2 = 1.0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                c[i, 1] = c1 * (c[i - 1, 0]
                                - (nodes[i - 1] - x0) * c[i - 1, 1]) / c2
                c[i, 0] = -c1 * (nodes[i - 1] - x0) * c[i - 1, 0] / c2
            c[j, 1] = ((nodes[i] - x0) * c[j, 1] - c[j, 0]) / c3
            c[j, 0] = (nodes[i] - x0) * c[j, 0] / c3
        c1 = c2
    return c[:, 1]


def _stencil_nodes(t: float, a: float, b: float, half_width: float) -> np.ndarray:
    """Five nodes in [a, b] bracketing t as symmetrically as the segment
    allows, always containing t itself."""
    w = min(half_width, 0.5 * (b - a))
    lo, hi = t - w, t + w
    if lo < a:
        hi += a - lo
        lo = a
    if hi > b:
        lo -= hi - b
        hi = b
        lo = max(lo, a)
    nodes = np.linspace(lo, hi, 5)
    nodes[int(np.argmin(np.abs(nodes - t)))] = t
    return np.unique(nodes)


class _SegmentEvaluator:
    """Hamiltonian and metric evaluation on one smooth segment.

    Evaluations at the right endpoint of a segment that ends in a quench
    are nudged inward so the pre-jump branch of ``h_of_t`` is sampled.
    """

    def __init__(self, schedule: HamiltonianSchedule, a: float, b: float,
                 fd_step: float = 1e-4):
        self.schedule = schedule
        self.a = a
        self.b = b
        self.fd = min(fd_step, 0.25 * (b - a))
        self._nudge = b in schedule.quench_times
        self._eps = 1e-11 * max(1.0, abs(b))
        # precomputed symmetric stencil (the overwhelmingly common case)
        self._offsets = self.fd * np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
        self._weights = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (6.0 * self.fd)

    def hamiltonian(self, t: float) -> np.ndarray:
        if self._nudge and t >= self.b - 0.5 * self._eps:
            t = self.b - self._eps
        return self.schedule.matrix(t)

    def _eig_many(self, ts):
        hs = np.stack([self.hamiltonian(t) for t in ts])
        energies, vecs = np.linalg.eig(hs)
        svals = np.linalg.svd(vecs, compute_uv=False)
        smin = float(svals[..., -1].min())
        if smin <= _EIG_DEFECT_TOL:
            raise Defective(
                f"eigenvector matrix nearly singular along schedule "
                f"(smallest singular value {smin:.3e})"
            )
        cond2 = float(((svals[..., 0] / svals[..., -1]) ** 2).max())
        if cond2 >= METRIC_COND_LIMIT:
            raise IllConditionedMetric(
                f"metric condition number {cond2:.3e} exceeds "
                f"{METRIC_COND_LIMIT:.1e}"
            )
        return hs, energies, vecs

    def gram_bundle(self, t: float):
        """(H(t), G(t), dG/dt) with G = V V+ the inverse metric."""
        if t - self.fd >= self.a and t + self.fd <= self.b:
            nodes = t + self._offsets
            k, weights = 2, self._weights
        else:
            nodes = _stencil_nodes(t, self.a, self.b, self.fd)
            k = int(np.argmin(np.abs(nodes - t)))
            weights = _fd_weights_first_derivative(t, nodes)
        hs, _, vecs = self._eig_many(nodes)
        grams = vecs @ vecs.conj().swapaxes(-1, -2)
        gdot = np.einsum("k,kij->ij", weights, grams)
        return hs[k], grams[k], gdot

    def gram_at(self, t: float) -> np.ndarray:
        _, _, vecs = self._eig_many([t])
        return vecs[0] @ vecs[0].conj().T

    def metric_at(self, t: float) -> np.ndarray:
        if self.schedule.metric_fn is not None:
            return np.asarray(self.schedule.metric_fn(t), dtype=complex)
        w = np.linalg.inv(self.gram_at(t))
        return 0.5 * (w + w.conj().T)

    def basis_at(self, t: float) -> BiorthoBasis:
        _, energies, vecs = self._eig_many([t])
        energies, vecs = energies[0], vecs[0]
        order = np.lexsort((energies.imag, energies.real))
        v = fix_gauge(vecs[:, order])
        left = np.linalg.inv(v)
        resid = np.eye(v.shape[0]) - left @ v
        if np.abs(resid).max() > 1e-13:
            left = left + resid @ left
        return BiorthoBasis(energies=energies[order], right=v, left=left)


class _GramApply:
    """Metric actions from G = W^-1 and its time derivative; uses
    dW/dt = -W (dG/dt) W so everything reduces to solves against G."""

    def __init__(self, gram: np.ndarray, gram_dot: np.ndarray):
        self.g = gram
        self.gdot = gram_dot

    def w(self, v):
        return np.linalg.solve(self.g, v)

    def winv(self, v):
        return self.g @ v

    def winv_wdot(self, v):
        return -self.gdot @ np.linalg.solve(self.g, v)

    def winv_wdot_from_w(self, v, wv):
        # reuses a precomputed W v to avoid a second solve
        return -self.gdot @ wv

    def wdot_winv(self, v):
        return -np.linalg.solve(self.g, self.gdot @ v)


class _DirectApply:
    """Metric actions from explicitly supplied W and dW/dt."""

    def __init__(self, w: np.ndarray, wdot: np.ndarray):
        self._w = w
        self._wdot = wdot

    def w(self, v):
        return self._w @ v

    def winv(self, v):
        return np.linalg.solve(self._w, v)

    def winv_wdot(self, v):
        return np.linalg.solve(self._w, self._wdot @ v)

    def winv_wdot_from_w(self, v, wv):
        return np.linalg.solve(self._w, self._wdot @ v)

    def wdot_winv(self, v):
        return self._wdot @ np.linalg.solve(self._w, v)


def _variant_rhs(variant: TdseVariant, h: np.ndarray, psi: np.ndarray,
                 metric) -> np.ndarray:
    if variant is TdseVariant.STANDARD:
        return -1j * (h @ psi)
    if variant is TdseVariant.WIESER:
        nrm2 = np.vdot(psi, psi).real
        shift = np.vdot(psi, (h.conj().T - h) @ psi) / (2.0 * nrm2)
        return -1j * (h @ psi + shift * psi)
    if variant is TdseVariant.NEW_NH:
        wpsi = metric.w(psi)
        sym = 0.5 * (metric.winv(h.conj().T @ wpsi) + h @ psi)
        return -1j * sym - 0.5 * metric.winv_wdot_from_w(psi, wpsi)
    if variant is TdseVariant.GONG:
        return -1j * (h @ psi) - 0.5 * metric.winv_wdot(psi)
    if variant is TdseVariant.LEFT_NH:
        winv_phi = metric.winv(psi)
        sym = 0.5 * (metric.w(h @ winv_phi) + h.conj().T @ psi)
        return -1j * sym + 0.5 * metric.wdot_winv(psi)
    raise ValueError(f"unhandled variant {variant}")


# ---------------------------------------------------------------------------
# public operations


def _segment_of(schedule: HamiltonianSchedule, t: float) -> tuple[float, float]:
    # half-open on the right so values *at* a quench time are post-quench,
    # matching the right-continuity convention of h_of_t
    segs = schedule.segments()
    for a, b in segs:
        if a <= t < b:
            return a, b
    if abs(t - schedule.t_span[1]) <= 1e-12 * max(1.0, abs(t)):
        return segs[-1]
    raise ValueError(f"t={t} outside schedule t_span {schedule.t_span}")


def metric_of(schedule: HamiltonianSchedule, t: float) -> np.ndarray:
    """Instantaneous metric W(t) of the schedule (unit-norm gauge)."""
    ev = _SegmentEvaluator(schedule, *_segment_of(schedule, t))
    return ev.metric_at(t)


def metric_derivative(schedule: HamiltonianSchedule, t: float,
                      h: float = 1e-3) -> tuple[np.ndarray, float]:
    """Time derivative of the instantaneous metric by central differences,
    Richardson-extrapolated once (steps h and h/2).

    Returns ``(dw_dt, error_estimate)``.  Raises :class:`QuenchAdjacent`
    when the stencil would straddle a declared discontinuity.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    for q in schedule.quench_times:
        if abs(t - q) <= h:
            raise QuenchAdjacent(
                f"t={t} is within h={h} of the quench at t={q}"
            )
    if schedule.metric_deriv_fn is not None:
        return np.asarray(schedule.metric_deriv_fn(t), dtype=complex), 0.0

    coarse = (metric_of(schedule, t + h) - metric_of(schedule, t - h)) / (2 * h)
    fine = (metric_of(schedule, t + h / 2) - metric_of(schedule, t - h / 2)) / h
    extrapolated = (4.0 * fine - coarse) / 3.0
    err = float(np.abs(fine - coarse).max()) / 3.0
    return extrapolated, err


def rhs(variant: TdseVariant, schedule: HamiltonianSchedule, t: float,
        psi, dw_dt=None) -> np.ndarray:
    """Evaluate one variant's right-hand side at (t, psi).

    ``dw_dt`` is the metric derivative; when omitted it is computed by
    :func:`metric_derivative` (which may raise near a quench time).
    Variants that do not involve the metric ignore it.
    """
    v = np.asarray(psi, dtype=complex).reshape(-1)
    h = schedule.matrix(t)
    if v.shape[0] != h.shape[0]:
        raise DimensionMismatch("state and Hamiltonian dimensions differ")
    metric = None
    if variant in _METRIC_VARIANTS:
        w = metric_of(schedule, t)
        if dw_dt is None:
            dw_dt, _ = metric_derivative(schedule, t)
        metric = _DirectApply(w, np.asarray(dw_dt, dtype=complex))
    return _variant_rhs(variant, h, v, metric)


# ---------------------------------------------------------------------------
# embedded Runge-Kutta pair (Fehlberg: propagate 4th order, estimate 5th)

_RK_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RK_A = [
    np.array([]),
    np.array([1 / 4]),
    np.array([3 / 32, 9 / 32]),
    np.array([1932 / 2197, -7200 / 2197, 7296 / 2197]),
    np.array([439 / 216, -8.0, 3680 / 513, -845 / 4104]),
    np.array([-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40]),
]
_RK_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_RK_ERR = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50,
                    2 / 55]) - _RK_B4


def _rk_step(f, t, y, h):
    """One Fehlberg step: returns the 4th-order update and the embedded
    error vector."""
    k = np.empty((6, y.shape[0]), dtype=complex)
    k[0] = f(t, y)
    for i in range(1, 6):
        k[i] = f(t + _RK_C[i] * h, y + h * (_RK_A[i] @ k[:i]))
    return y + h * (_RK_B4 @ k), h * (_RK_ERR @ k)


def _initial_step(f, t, y, opts, span):
    sc = opts.atol + opts.rtol * np.abs(y)
    f0 = f(t, y)
    d0 = math.sqrt(float(np.mean(np.abs(y / sc) ** 2)))
    d1 = math.sqrt(float(np.mean(np.abs(f0 / sc) ** 2)))
    h0 = 0.01 * d0 / d1 if d1 > 1e-10 * max(d0, 1.0) else 1e-3 * span
    return min(h0, 0.1 * span, opts.max_step)


def _integrate_smooth(f, t0, t1, y0, opts, stops, on_accept):
    """Step from t0 to t1, landing exactly on every time in ``stops`` and on
    t1.  Calls ``on_accept(t, y)`` after each accepted step."""
    targets = sorted({float(s) for s in stops if t0 < s < t1} | {t1})
    t, y = t0, np.array(y0, dtype=complex)
    accepted = rejected = 0
    idx = 0

    if opts.fixed_step is None:
        h = _initial_step(f, t, y, opts, t1 - t0)
    steps = 0
    while idx < len(targets):
        target = targets[idx]
        steps += 1
        if steps > opts.max_steps:
            raise StepSizeUnderflow(
                f"exceeded {opts.max_steps} steps on [{t0}, {t1}]"
            )
        if opts.fixed_step is not None:
            h = opts.fixed_step
        h = min(h, opts.max_step)
        tiny = 1e-14 * max(1.0, abs(t))
        if t + h >= target - tiny or target - (t + h) < 0.25 * h * 1e-6:
            h_try = target - t
            lands = True
        else:
            h_try = h
            lands = False
        if h_try < 1e-13 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t}")

        y_new, err_vec = _rk_step(f, t, y, h_try)
        if opts.fixed_step is None:
            sc = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean(np.abs(err_vec / sc) ** 2)))
        else:
            err = 0.0

        if err <= 1.0:
            t = target if lands else t + h_try
            y = y_new
            accepted += 1
            if lands:
                idx += 1
            on_accept(t, y)
            if opts.fixed_step is None:
                grow = opts.safety * err ** -0.2 if err > 1e-12 else 5.0
                h = h_try * min(5.0, max(0.2, grow))
        else:
            rejected += 1
            h = h_try * max(0.2, opts.safety * err ** -0.2)
    return y, accepted, rejected


# ---------------------------------------------------------------------------
# evolve


def _left_projectors(basis: BiorthoBasis) -> np.ndarray:
    """Stack of |n><n| (projectors of the mirrored space)."""
    return np.einsum("in,jn->nij", basis.right, basis.right.conj())


def _metric_state_for(variant: TdseVariant, basis: BiorthoBasis,
                      damping: np.ndarray) -> MetricState:
    if variant is not TdseVariant.LEFT_NH:
        return _connection_from(basis, damping)
    projectors = _left_projectors(basis)
    w_inst = basis.right @ basis.right.conj().T
    w_inst = 0.5 * (w_inst + w_inst.conj().T)
    w_conn = np.einsum("n,nij->ij", np.exp(damping), projectors)
    w_conn = 0.5 * (w_conn + w_conn.conj().T)
    return MetricState(w_inst=w_inst, projectors=projectors, damping=damping,
                       w_conn=w_conn, eta=matrix_sqrt_pd(w_conn))


def _conserved_from_basis(variant: TdseVariant, basis: BiorthoBasis,
                          y: np.ndarray) -> float:
    if variant is TdseVariant.LEFT_NH:
        # <phi| W^-1 |phi> with W^-1 = V V+
        return float(np.sum(np.abs(basis.right.conj().T @ y) ** 2))
    # <psi| W |psi> with W = L+ L
    return float(np.sum(np.abs(basis.left @ y) ** 2))


def evolve(variant: TdseVariant, schedule: HamiltonianSchedule, psi0,
           opts: IntegratorOptions | None = None,
           output_times: Sequence[float] | None = None) -> Trajectory:
    """Integrate one evolution law over the schedule.

    Between quench times the embedded Runge-Kutta pair adapts its step; at
    each declared quench time the jump operator is applied to the state.
    Samples are recorded at ``output_times`` (landed on exactly) or at every
    accepted step when omitted.  Damping integrals for the component
    bookkeeping accumulate by trapezoid over the accepted steps with
    eigenstate tracking, and restart at each declared discontinuity where
    the pairing is undefined.

    For the LEFT_NH variant ``psi0`` is the left-space vector |Psi>> and the
    conserved quadratic form uses the inverse metric.
    """
    opts = opts or IntegratorOptions()
    y = np.asarray(psi0, dtype=complex).reshape(-1).copy()
    if y.shape[0] != schedule.dim:
        raise DimensionMismatch("psi0 dimension differs from schedule dim")
    if np.linalg.norm(y) == 0.0:
        raise ZeroState("psi0 must be nonzero")

    t0, t1 = schedule.t_span
    if output_times is None:
        wanted = None
    else:
        wanted = np.asarray(sorted(float(t) for t in output_times))
        if wanted.size and (wanted[0] < t0 - 1e-12 or wanted[-1] > t1 + 1e-12):
            raise ValueError("output times must lie inside t_span")

    use_direct = schedule.metric_fn is not None

    times: list[float] = []
    states: list[WaveState] = []
    metrics: list[MetricState] = []
    quench_records: list[QuenchRecord] = []
    accepted_total = rejected_total = 0
    q_min = math.inf
    q_max = -math.inf
    q_first: float | None = None

    state = {"damping": np.zeros(schedule.dim),
             "pos": np.arange(schedule.dim),
             "basis": None, "t": t0}

    def is_wanted(t: float) -> bool:
        if wanted is None:
            return True
        if not wanted.size:
            return False
        k = np.searchsorted(wanted, t)
        for j in (k - 1, k):
            if 0 <= j < wanted.size and abs(wanted[j] - t) < 1e-10:
                return True
        return False

    def record(t: float, yv: np.ndarray, basis: BiorthoBasis):
        damping_now = np.zeros(schedule.dim)
        damping_now[state["pos"]] = state["damping"]
        mstate = _metric_state_for(variant, basis, damping_now)
        comps, a = compute_components(yv, mstate)
        times.append(t)
        states.append(WaveState(psi=yv.copy(), t=t, components=comps,
                                normalizer=a))
        metrics.append(mstate)

    def monitor(t: float, yv: np.ndarray, basis: BiorthoBasis):
        nonlocal q_min, q_max, q_first
        q = _conserved_from_basis(variant, basis, yv)
        q_first = q if q_first is None else q_first
        q_min = min(q_min, q)
        q_max = max(q_max, q)

    segments = schedule.segments()
    for seg_idx, (a, b) in enumerate(segments):
        ev = _SegmentEvaluator(schedule, a, b, opts.fd_step)
        basis_a = ev.basis_at(a)
        if seg_idx > 0:
            # eigenstate pairing is undefined across the jump
            state["damping"] = np.zeros(schedule.dim)
            state["pos"] = np.arange(schedule.dim)
        state["basis"] = basis_a
        state["t"] = a
        monitor(a, y, basis_a)
        if seg_idx == 0 and is_wanted(a):
            record(a, y, basis_a)

        if use_direct:
            def f(t, yv, _ev=ev):
                w = np.asarray(schedule.metric_fn(t), dtype=complex)
                wd = np.asarray(schedule.metric_deriv_fn(t), dtype=complex)
                return _variant_rhs(variant, _ev.hamiltonian(t), yv,
                                    _DirectApply(w, wd))
        elif variant in _METRIC_VARIANTS:
            def f(t, yv, _ev=ev):
                h, gram, gdot = _ev.gram_bundle(t)
                return _variant_rhs(variant, h, yv, _GramApply(gram, gdot))
        else:
            def f(t, yv, _ev=ev):
                return _variant_rhs(variant, _ev.hamiltonian(t), yv, None)

        stops = [] if wanted is None else [t for t in wanted if a < t < b]

        def on_accept(t, yv, _ev=ev):
            basis = _ev.basis_at(t)
            perm = track_states(state["basis"], basis)
            dt = t - state["t"]
            pos, new_pos = state["pos"], perm[state["pos"]]
            state["damping"] = state["damping"] + dt * (
                state["basis"].energies.imag[pos]
                + basis.energies.imag[new_pos])
            state["pos"] = new_pos
            state["basis"], state["t"] = basis, t
            monitor(t, yv, basis)
            if is_wanted(t):
                record(t, yv, basis)

        y, acc, rej = _integrate_smooth(f, a, b, y, opts, stops, on_accept)
        accepted_total += acc
        rejected_total += rej

        if seg_idx < len(segments) - 1:
            w_minus = ev.metric_at(b)
            ev_next = _SegmentEvaluator(schedule, *segments[seg_idx + 1],
                                        fd_step=opts.fd_step)
            w_plus = ev_next.metric_at(b)
            event = quench_mod.quench_operator(w_minus, w_plus)
            if variant is TdseVariant.LEFT_NH:
                psi_minus = np.linalg.solve(w_minus, y)
                psi_plus = event.l_op @ psi_minus
                y = w_plus @ psi_plus
            else:
                psi_minus = y.copy()
                y = event.l_op @ y
                psi_plus = y.copy()
            quench_records.append(QuenchRecord(t=b, event=event,
                                               psi_minus=psi_minus,
                                               psi_plus=psi_plus))

    if not times:
        record(t1, y, state["basis"])

    drift = (q_max - q_min) / abs(q_first)
    return Trajectory(
        variant=variant,
        times=np.asarray(times),
        states=states,
        metrics=metrics,
        unitarity_drift=drift,
        accepted_steps=accepted_total,
        rejected_steps=rejected_total,
        quench_records=quench_records,
    )


def check_left_right_symmetry(schedule: HamiltonianSchedule, psi0,
                              t1: float | None = None,
                              opts: IntegratorOptions | None = None,
                              n_samples: int = 50) -> float:
    """Consistency of the mirrored evolutions.

    Evolves |Psi> with the default variant and |Psi>> = W|Psi> with the
    mirrored one, then returns max_t || W(t)|Psi(t)> - |Psi(t)>> || over a
    shared sample grid.  Below 1e-6 at default tolerances on smooth
    schedules.
    """
    t0, t_end = schedule.t_span
    if t1 is not None:
        if not t0 < t1 <= t_end:
            raise ValueError("t1 outside schedule span")
        schedule = HamiltonianSchedule(
            dim=schedule.dim, h_of_t=schedule.h_of_t, t_span=(t0, t1),
            quench_times=tuple(q for q in schedule.quench_times if q < t1),
            metric_fn=schedule.metric_fn,
            metric_deriv_fn=schedule.metric_deriv_fn,
        )
    grid = np.linspace(schedule.t_span[0], schedule.t_span[1], n_samples)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    phi0 = metric_of(schedule, schedule.t_span[0]) @ psi0

    right = evolve(TdseVariant.NEW_NH, schedule, psi0, opts, output_times=grid)
    left = evolve(TdseVariant.LEFT_NH, schedule, phi0, opts, output_times=grid)
    worst = 0.0
    for tr, tl in zip(right.states, left.states):
        w = metric_of(schedule, tr.t)
        worst = max(worst, float(np.linalg.norm(w @ tr.psi - tl.psi)))
    return worst
