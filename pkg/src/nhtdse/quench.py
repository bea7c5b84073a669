"""The discontinuous jump operator across a metric change, and a lattice
probe for the instantaneous far-field response it produces.

When the Hamiltonian jumps, the instantaneous metric jumps with it and the
state must jump too, by an operator L that preserves the metric quadratic
form: L+ W+ L = W- together with the mirror constraint W+ L = L+ W+.  With
A = sqrt(W-) and B = sqrt(W+) (hermitian PD roots) the solution used here is

    L = B^-1 (B^-1 W- B^-1)^(1/2) B,

equivalently L = B^-1 U A with U the adjoint of the unitary polar factor of
A B^-1.  This choice is the unique one continuous in the metrics: L -> I as
W+ -> W-, so hermitian quenches leave the state untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .biortho import matrix_sqrt_pd
from .errors import DimensionMismatch, NotPositiveDefinite


@dataclass(frozen=True)
class QuenchEvent:
    """The jump data at one discontinuity: the two metrics, the jump
    operator ``l_op`` and the unitary factor ``u`` that generates it."""

    w_minus: np.ndarray
    w_plus: np.ndarray
    l_op: np.ndarray
    u: np.ndarray

    @property
    def dim(self) -> int:
        return self.w_minus.shape[0]


def _check_metric(m, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.conj().T).max() > 1e-10 * scale:
        raise NotPositiveDefinite(f"{name} is not hermitian")
    return 0.5 * (a + a.conj().T)


def quench_operator(w_minus, w_plus) -> QuenchEvent:
    """Jump operator between two hermitian positive-definite metrics.

    The polar decomposition is taken through the SVD, which keeps the
    output deterministic even when the spectrum of the similarity problem
    is degenerate.
    """
    wm = _check_metric(w_minus, "pre-quench metric")
    wp = _check_metric(w_plus, "post-quench metric")
    if wm.shape != wp.shape:
        raise DimensionMismatch(
            f"metric shapes differ: {wm.shape} vs {wp.shape}"
        )
    a = matrix_sqrt_pd(wm)      # raises NotPositiveDefinite if needed
    b = matrix_sqrt_pd(wp)
    c = a @ np.linalg.inv(b)
    # polar factor: c = u_p p with p hermitian PD
    svd_u, _, svd_vh = np.linalg.svd(c)
    u_p = svd_u @ svd_vh
    u = u_p.conj().T
    l_op = np.linalg.solve(b, u @ a)
    return QuenchEvent(w_minus=wm, w_plus=wp, l_op=l_op, u=u)


def apply_quench(psi, event: QuenchEvent) -> np.ndarray:
    """Propagate a state across the discontinuity: psi+ = L psi-."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if v.shape[0] != event.dim:
        raise DimensionMismatch(
            f"state dim {v.shape[0]} != event dim {event.dim}"
        )
    return event.l_op @ v


# ---------------------------------------------------------------------------
# lattice probe


@dataclass(frozen=True)
class LatticeModelSpec:
    """Open 1D chain with possibly asymmetric hoppings.

    ``hoppings[l]`` is the pair (forward, backward): the forward amplitude
    multiplies the l -> l+1 transfer H[l+1, l], the backward one the
    reverse.  ``quench_edit`` replaces one bond (kind "bond") or one onsite
    energy (kind "site") at the quench time.
    """

    n_sites: int
    onsite: tuple[complex, ...]
    hoppings: tuple[tuple[complex, complex], ...]
    quench_edit: tuple[Literal["bond", "site"], int, tuple[complex, complex] | complex]

    def __post_init__(self):
        if self.n_sites < 4:
            raise ValueError("need at least 4 sites")
        if len(self.onsite) != self.n_sites:
            raise ValueError("onsite list length must equal n_sites")
        if len(self.hoppings) != self.n_sites - 1:
            raise ValueError("need n_sites - 1 bond hopping pairs")
        kind, idx, _ = self.quench_edit
        limit = self.n_sites - 1 if kind == "bond" else self.n_sites
        if kind not in ("bond", "site") or not 0 <= idx < limit:
            raise ValueError(f"bad quench edit {self.quench_edit!r}")

    def hamiltonian(self, after_quench: bool = False) -> np.ndarray:
        h = np.diag(np.asarray(self.onsite, dtype=complex))
        hops = list(self.hoppings)
        onsite = list(self.onsite)
        if after_quench:
            kind, idx, value = self.quench_edit
            if kind == "bond":
                fwd, bwd = value
                hops[idx] = (complex(fwd), complex(bwd))
            else:
                onsite[idx] = complex(value)
                h = np.diag(np.asarray(onsite, dtype=complex))
        for l, (fwd, bwd) in enumerate(hops):
            h[l + 1, l] = fwd
            h[l, l + 1] = bwd
        return h

    @property
    def edit_position(self) -> float:
        kind, idx, _ = self.quench_edit
        return idx + 0.5 if kind == "bond" else float(idx)


def asymmetric_chain(n_sites: int, t_right: complex, t_left: complex,
                     cut_bond: int | None = None,
                     onsite: complex = 0.0) -> LatticeModelSpec:
    """Uniform chain with direction-dependent hoppings whose quench cuts one
    bond (the center bond when ``cut_bond`` is omitted)."""
    if cut_bond is None:
        cut_bond = n_sites // 2 - 1
    return LatticeModelSpec(
        n_sites=n_sites,
        onsite=(complex(onsite),) * n_sites,
        hoppings=((complex(t_right), complex(t_left)),) * (n_sites - 1),
        quench_edit=("bond", cut_bond, (0.0, 0.0)),
    )


@dataclass(frozen=True)
class LrbProfile:
    """Per-site response to the jump at the quench time.

    ``psi_jump[i]`` is |psi_i(tq+) - psi_i(tq-)|; ``density_jump[i]`` the
    change of the metric-weighted site density across the jump.
    ``distances[i]`` is the distance of site i from the edited bond/site.
    """

    sites: np.ndarray
    distances: np.ndarray
    psi_jump: np.ndarray
    density_jump: np.ndarray
    event: QuenchEvent
    psi_minus: np.ndarray
    psi_plus: np.ndarray


def lrb_probe(spec: LatticeModelSpec, psi0, t_q: float = 1.0,
              opts=None) -> LrbProfile:
    """Evolve to the quench time, apply the jump, and report the per-site
    state and density changes.

    A hermitian pre/post pair has identical (unit) metrics on both sides, so
    the jump operator is the identity and the whole profile vanishes; with
    genuinely non-hermitian metrics the jump operator is dense and sites far
    from the edited bond respond instantly.
    """
    from .biortho import eig_biortho, instantaneous_metric, observable
    from .engine import HamiltonianSchedule, TdseVariant, evolve

    h_pre = spec.hamiltonian(after_quench=False)
    h_post = spec.hamiltonian(after_quench=True)
    n = spec.n_sites

    schedule = HamiltonianSchedule(
        dim=n, h_of_t=lambda t: h_pre, t_span=(0.0, t_q))
    traj = evolve(TdseVariant.NEW_NH, schedule, psi0, opts,
                  output_times=[t_q])
    psi_minus = traj.final_state.psi

    metric_minus = instantaneous_metric(eig_biortho(h_pre))
    metric_plus = instantaneous_metric(eig_biortho(h_post))
    event = quench_operator(metric_minus.w_inst, metric_plus.w_inst)
    psi_plus = apply_quench(psi_minus, event)

    psi_jump = np.abs(psi_plus - psi_minus)
    density_jump = np.empty(n)
    for i in range(n):
        proj = np.zeros((n, n), dtype=complex)
        proj[i, i] = 1.0
        before = observable(psi_minus, proj, metric_minus).real
        after = observable(psi_plus, proj, metric_plus).real
        density_jump[i] = after - before

    sites = np.arange(n)
    distances = np.abs(sites - spec.edit_position)
    return LrbProfile(sites=sites, distances=distances, psi_jump=psi_jump,
                      density_jump=density_jump, event=event,
                      psi_minus=psi_minus, psi_plus=psi_plus)
