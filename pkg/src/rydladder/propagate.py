"""Real-time evolution exp(-iHt), product-state and adiabatic-ramp
preparation, and trajectory recording.

The propagator is a short-iterate Lanczos (Krylov) exponential with
adaptive substeps: per substep the local truncation error is estimated
from the residual of the projected dynamics and the substep is shrunk
until the error fits a per-unit-time budget, so the accumulated error
over a full evolution stays at or below the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import AccuracyError, CapacityError, ConfigError
from .hilbert import (
    HamiltonianSpec,
    TruncatedBasis,
    _bit_slices,
    _build_diagonal,
    check_normalized,
    hamiltonian_matvec,
)
from .lattice import TOP, BOTTOM, LadderGeometry, PhysicalParams, interaction_matrix

DEFAULT_TOL = 1e-8
DEFAULT_MAX_KRYLOV_DIM = 30
FULL_RECORD_MAX_ATOMS = 20   # above this, trajectories must record observables
_BASIS_MEMORY_LIMIT = 1 << 27  # complex entries; ~2 GiB of stored Lanczos vectors


# ---------------------------------------------------------------------------
# state preparation

def fields_to_bitmask(field_values) -> int:
    """Basis bitmask whose per-rung pattern encodes the given field values
    under the staggered mapping (odd rung +1 -> top excited, -1 -> bottom;
    even rungs swapped; 0 -> both ground)."""
    mask = 0
    for j, f in enumerate(field_values, start=1):
        f = int(f)
        if f not in (-1, 0, 1):
            raise ConfigError(f"field value at rung {j} must be in {{-1,0,+1}}, got {f}")
        if f == 0:
            continue
        top_minus_bottom = f if j % 2 == 1 else -f
        leg = TOP if top_minus_bottom == 1 else BOTTOM
        mask |= 1 << (2 * (j - 1) + leg)
    return mask


def prepare_product_state(geom: LadderGeometry, field_values) -> np.ndarray:
    """Computational basis state encoding one field value per rung."""
    if len(field_values) != geom.n_rungs:
        raise ConfigError(
            f"need {geom.n_rungs} field values, got {len(field_values)}"
        )
    psi = np.zeros(1 << geom.n_atoms, dtype=complex)
    psi[fields_to_bitmask(field_values)] = 1.0
    return psi


def central_excitation_fields(n_rungs: int) -> list[int]:
    """E = -1 on the central rung, zero elsewhere (odd ladders only)."""
    if n_rungs % 2 == 0:
        raise ConfigError("central rung undefined for an even number of rungs")
    fields = [0] * n_rungs
    fields[(n_rungs - 1) // 2] = -1
    return fields


def central_excitation_state(geom: LadderGeometry) -> np.ndarray:
    return prepare_product_state(geom, central_excitation_fields(geom.n_rungs))


# ---------------------------------------------------------------------------
# schedules

@dataclass
class RampSchedule:
    """Piecewise-linear control curves for the global drive over [0, T].

    `times` must start at 0 and increase strictly; a single breakpoint
    describes a zero-duration schedule.
    """

    times: np.ndarray
    omega_values: np.ndarray
    delta_values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.omega_values = np.asarray(self.omega_values, dtype=float)
        self.delta_values = np.asarray(self.delta_values, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 1:
            raise ConfigError("schedule needs at least one breakpoint")
        if self.omega_values.shape != self.times.shape or self.delta_values.shape != self.times.shape:
            raise ConfigError("schedule curves must match the breakpoint count")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ConfigError("schedule breakpoints must increase strictly")
        if self.times[0] != 0.0:
            raise ConfigError("schedule must start at t = 0")
        for name, vals in (("omega", self.omega_values), ("delta", self.delta_values)):
            if not np.all(np.isfinite(vals)):
                raise ConfigError(f"schedule {name} curve contains non-finite values")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def omega_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.omega_values))

    def delta_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.delta_values))


def default_preparation_ramp(params: PhysicalParams, duration: float = 2.0) -> RampSchedule:
    """Ramp that prepares a single excitation on a locally detuned atom.

    The global detuning rises linearly from -6 Omega to -2 Omega while the
    drive is switched on over the first quarter and off over the last; with
    the default +4 Omega local detuning the target atom sweeps through
    resonance mid-ramp while all other atoms stay strongly penalized.
    """
    if duration < 0:
        raise ConfigError("ramp duration must be >= 0")
    w = params.rabi_frequency
    if duration == 0.0:
        return RampSchedule([0.0], [0.0], [-6.0 * w])
    times = np.array([0.0, 0.25, 0.75, 1.0]) * duration
    omega = np.array([0.0, w, w, 0.0])
    delta = np.interp(times, [0.0, duration], [-6.0 * w, -2.0 * w])
    return RampSchedule(times, omega, delta)


# ---------------------------------------------------------------------------
# Krylov propagator

def _lanczos_recurrence(matvec, v0, max_dim, keep_basis=True):
    """Three-term Lanczos recurrence from a normalized start vector.

    Returns (basis, alphas, betas, beta_next, breakdown); `basis` is None
    when keep_basis is False (low-memory mode).
    """
    basis = [v0] if keep_basis else None
    v_prev = None
    v = v0
    alphas = []
    betas = []
    w = matvec(v)
    a = np.vdot(v, w).real
    alphas.append(a)
    w -= a * v
    scale = max(1.0, abs(a))
    for _ in range(1, max_dim):
        b = float(np.linalg.norm(w))
        if b <= 1e-13 * scale:
            return basis, np.array(alphas), np.array(betas), 0.0, True
        v_prev, v = v, w / b
        if keep_basis:
            basis.append(v)
        betas.append(b)
        w = matvec(v)
        w -= b * v_prev
        a = np.vdot(v, w).real
        w -= a * v
        alphas.append(a)
        scale = max(scale, abs(a), b)
    b = float(np.linalg.norm(w))
    breakdown = b <= 1e-13 * scale
    return basis, np.array(alphas), np.array(betas), (0.0 if breakdown else b), breakdown


def _assemble(matvec, v0, alphas, betas, y):
    """Recompute the Lanczos basis on the fly and form sum_k y_k v_k.

    Mirrors `_lanczos_recurrence` arithmetic exactly so both storage
    modes produce identical states.
    """
    v_prev = None
    v = v0
    out = y[0] * v
    w = matvec(v)
    w -= alphas[0] * v
    for k in range(1, len(alphas)):
        b = betas[k - 1]
        v_prev, v = v, w / b
        out += y[k] * v
        w = matvec(v)
        w -= b * v_prev
        w -= alphas[k] * v
    return out


def _krylov_step(matvec, psi, t_remain, err_rate, max_dim, tau_hint, keep_basis):
    """One adaptive substep exp(-i tau H) psi with tau <= t_remain.

    Returns (new state, tau).  Raises AccuracyError when no acceptable
    substep exists within the subspace limit.
    """
    basis, alphas, betas, beta_next, breakdown = _lanczos_recurrence(
        matvec, psi, max_dim, keep_basis
    )
    m = len(alphas)
    if m == 1:
        lam = alphas.copy()
        q = np.ones((1, 1))
    else:
        lam, q = eigh_tridiagonal(alphas, betas)
    q0 = q[0, :]
    qm = q[-1, :]

    def coeff(tau):
        return q @ (np.exp(-1j * tau * lam) * q0)

    if breakdown:
        tau = t_remain
    else:
        tau = min(t_remain, tau_hint) if tau_hint > 0 else t_remain
        err = math.inf
        for _ in range(200):
            samples = tau * np.array([0.25, 0.5, 0.75, 1.0])
            edge = max(abs(qm @ (np.exp(-1j * s * lam) * q0)) for s in samples)
            err = beta_next * tau * edge
            if err <= err_rate * tau:
                break
            tau *= 0.5
        else:
            raise AccuracyError(
                f"Krylov step did not meet tolerance within subspace dimension {max_dim}",
                residual=err,
            )
    y = coeff(tau)
    if keep_basis:
        out = y[0] * basis[0]
        for k in range(1, m):
            out += y[k] * basis[k]
    else:
        out = _assemble(matvec, psi, alphas, betas, y)
    return out, tau


def _advance(matvec, psi, dt, err_rate, max_dim, tau_hint, keep_basis):
    remaining = dt
    while remaining > 0.0:
        psi, tau = _krylov_step(
            matvec, psi, remaining, err_rate, max_dim, tau_hint, keep_basis
        )
        remaining -= tau
        tau_hint = 2.0 * tau
    return psi, tau_hint


def _spec_matvec(spec: HamiltonianSpec):
    diag = spec.diagonal
    n = spec.n_atoms
    half = 0.5 * spec.params.rabi_frequency
    return lambda psi: hamiltonian_matvec(diag, psi, half, n)


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    """Snapshots of an evolution at the requested record times.

    Exactly one of `states` (full state vectors) or `records` (observer
    rows) is populated; `final_state` always holds the state at the end
    of the evolution window.
    """

    times: np.ndarray
    states: list[np.ndarray] | None
    records: list | None
    final_state: np.ndarray = field(repr=False, default=None)


def krylov_evolve(
    spec: HamiltonianSpec,
    psi0: np.ndarray,
    t: float,
    record_times=None,
    *,
    tol: float = DEFAULT_TOL,
    max_dim: int = DEFAULT_MAX_KRYLOV_DIM,
    observer=None,
    basis: TruncatedBasis | None = None,
) -> Trajectory:
    """Evolve psi0 under exp(-iHt), recording snapshots along the way.

    Parameters
    ----------
    record_times : sequence of floats within [0, t], optional
        Times at which to snapshot.  Defaults to [t].  Duplicates are
        collapsed.
    tol : float
        Total error budget for the whole evolution (per-unit-time
        allocation across substeps).
    observer : callable (time, state) -> row, optional
        When given, rows are stored instead of state vectors; required
        for systems with more than 20 atoms.
    basis : TruncatedBasis, optional
        Evolve in a blockade-truncated subspace; snapshots are embedded
        back into the full space.
    """
    if t < 0:
        raise ConfigError(f"evolution time must be >= 0, got {t}")
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (spec.dim,):
        raise ConfigError(f"state has shape {psi0.shape}, expected ({spec.dim},)")
    check_normalized(psi0)

    if record_times is None:
        times = np.array([float(t)])
    else:
        times = np.unique(np.asarray(list(record_times), dtype=float))
    if len(times) and (times[0] < 0.0 or times[-1] > t * (1 + 1e-12) + 1e-15):
        raise ConfigError("record_times must lie within [0, t]")

    store_states = observer is None
    if store_states and len(times) and spec.n_atoms > FULL_RECORD_MAX_ATOMS:
        raise CapacityError(
            f"full-state recording is limited to {FULL_RECORD_MAX_ATOMS} atoms; "
            "pass an observer to record observable rows instead"
        )

    if basis is not None:
        work = basis.project(psi0)
        nrm = np.linalg.norm(work)
        if nrm == 0.0:
            raise ConfigError("initial state has no weight in the truncated basis")
        work = work / nrm
        diag = basis.diagonal_energies(spec)
        matvec = lambda x: basis.apply_hamiltonian(spec, x, diag)
        embed = basis.embed
        keep_basis = basis.size * max_dim <= _BASIS_MEMORY_LIMIT
    else:
        work = psi0.copy()
        matvec = _spec_matvec(spec)
        embed = lambda x: x
        keep_basis = spec.dim * max_dim <= _BASIS_MEMORY_LIMIT

    err_rate = tol / t if t > 0 else 0.0
    snapshots = [] if store_states else None
    records = None if store_states else []
    current = 0.0
    tau_hint = 0.0
    for t_rec in times:
        work, tau_hint = _advance(
            matvec, work, t_rec - current, err_rate, max_dim, tau_hint, keep_basis
        )
        current = t_rec
        snap = embed(work)
        if abs(np.linalg.norm(snap) - 1.0) > 1e-6:
            raise AccuracyError(
                "propagated state lost normalization",
                residual=float(abs(np.linalg.norm(snap) - 1.0)),
            )
        if store_states:
            snapshots.append(snap.copy() if basis is None else snap)
        else:
            records.append(observer(t_rec, snap))
    work, _ = _advance(matvec, work, t - current, err_rate, max_dim, tau_hint, keep_basis)
    return Trajectory(
        times=times,
        states=snapshots,
        records=records,
        final_state=embed(work),
    )


def dense_evolve(spec: HamiltonianSpec, psi0: np.ndarray, t: float) -> np.ndarray:
    """Exact exp(-iHt) psi0 via eigendecomposition; oracle for small systems."""
    from .hilbert import DENSE_MAX_ATOMS, dense_matrix

    if spec.n_atoms > DENSE_MAX_ATOMS:
        raise CapacityError(
            f"dense evolution limited to {DENSE_MAX_ATOMS} atoms, got {spec.n_atoms}"
        )
    lam, u = np.linalg.eigh(dense_matrix(spec))
    return (u * np.exp(-1j * lam * t)) @ (u.conj().T @ np.asarray(psi0, dtype=complex))


# ---------------------------------------------------------------------------
# adiabatic preparation

@dataclass
class PreparationResult:
    state: np.ndarray
    overlap: float
    target_index: int


def adiabatic_prepare(
    geom: LadderGeometry,
    params: PhysicalParams,
    target_atom: int,
    schedule: RampSchedule,
    *,
    local_detuning: float | None = None,
    time_step: float = 0.01,
    tol: float = DEFAULT_TOL,
    max_dim: int = DEFAULT_MAX_KRYLOV_DIM,
) -> PreparationResult:
    """Drive the all-ground state towards a single excitation on one atom.

    Evolves under the time-dependent Hamiltonian whose global Omega(t)
    and Delta(t) follow `schedule` (sampled piecewise-constant at
    interval midpoints) with a constant extra detuning on `target_atom`
    (default +4 Omega).  Returns the final state together with its
    overlap with the intended single-excitation basis state.
    """
    n = geom.n_atoms
    if not 0 <= target_atom < n:
        raise ConfigError(f"target_atom {target_atom} outside 0..{n - 1}")
    if time_step <= 0:
        raise ConfigError("time_step must be > 0")
    if local_detuning is None:
        local_detuning = 4.0 * params.rabi_frequency

    pair_diag = _build_diagonal(n, np.zeros(n), interaction_matrix(geom.positions, params))
    occ_total = np.zeros(1 << n)
    nd = occ_total.reshape((2,) * n)
    for j in range(n):
        nd[_bit_slices(n, j)] += 1.0
    occ_target = np.zeros(1 << n)
    occ_target.reshape((2,) * n)[_bit_slices(n, target_atom)] = 1.0

    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    duration = schedule.duration
    if duration > 0.0:
        n_steps = max(1, math.ceil(duration / time_step))
        edges = np.linspace(0.0, duration, n_steps + 1)
        err_rate = tol / duration
        keep_basis = (1 << n) * max_dim <= _BASIS_MEMORY_LIMIT
        tau_hint = 0.0
        for t0, t1 in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (t0 + t1)
            diag = pair_diag - schedule.delta_at(mid) * occ_total - local_detuning * occ_target
            matvec = _frozen_matvec(diag, schedule.omega_at(mid), n)
            psi, tau_hint = _advance(
                matvec, psi, t1 - t0, err_rate, max_dim, tau_hint, keep_basis
            )
    target_index = 1 << target_atom
    return PreparationResult(
        state=psi,
        overlap=float(abs(psi[target_index]) ** 2),
        target_index=target_index,
    )


def _frozen_matvec(diag, omega, n_atoms):
    half = 0.5 * omega
    return lambda psi: hamiltonian_matvec(diag, psi, half, n_atoms)
