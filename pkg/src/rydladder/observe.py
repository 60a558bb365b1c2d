"""Staggered field and charge observables, half-chain entanglement
entropy, and parameter sweeps over the drive/geometry plane.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .hilbert import HamiltonianSpec, check_normalized, n_atoms_of
from .lattice import LadderGeometry, build_ladder, blockade_radius
from .propagate import (
    DEFAULT_MAX_KRYLOV_DIM,
    DEFAULT_TOL,
    central_excitation_state,
    krylov_evolve,
)

SCHMIDT_CUTOFF = 1e-14  # singular values below this are dropped from p ln p


@dataclass
class FieldExpectation:
    """Per-rung field averages and outcome probabilities.

    For every rung, p_minus + p_zero + p_plus + p_rr = 1; `p_rr` is the
    diagnostic weight of doubly excited (blockade-violating) rungs,
    which carry field value 0.
    """

    e_avg: np.ndarray
    p_minus: np.ndarray
    p_zero: np.ndarray
    p_plus: np.ndarray
    p_rr: np.ndarray


@dataclass
class EntropyTrace:
    times: np.ndarray
    values: np.ndarray


@dataclass
class PhaseDiagram:
    """Maximum half-chain entropy over an evolution window, on a grid of
    detuning ratio (rows) by blockade ratio (columns)."""

    delta_over_omega: np.ndarray
    rb_over_a: np.ndarray
    values: np.ndarray
    window: float


def field_expectations(psi: np.ndarray, geom: LadderGeometry) -> FieldExpectation:
    """Staggered per-rung field <E_j> = (<n_top> - <n_bottom>) (-1)^(j+1)
    plus the four outcome probabilities per rung."""
    check_normalized(psi)
    if n_atoms_of(psi) != geom.n_atoms:
        raise ConfigError("state size does not match the geometry")
    probs = np.abs(psi) ** 2
    n = geom.n_rungs
    p = np.zeros((n, 4))  # columns: gg, top-only, bottom-only, rr
    for j in range(n):
        top, _bottom = geom.rung_atoms(j + 1)
        # rung bits are adjacent: axes (rest, bottom bit, top bit, below)
        marg = probs.reshape(-1, 2, 2, 1 << top).sum(axis=(0, 3))
        p[j, 0] = marg[0, 0]
        p[j, 1] = marg[0, 1]
        p[j, 2] = marg[1, 0]
        p[j, 3] = marg[1, 1]
    stag = geom.staggering
    p_plus = np.where(stag == 1, p[:, 1], p[:, 2])
    p_minus = np.where(stag == 1, p[:, 2], p[:, 1])
    return FieldExpectation(
        e_avg=p_plus - p_minus,
        p_minus=p_minus,
        p_zero=p[:, 0],
        p_plus=p_plus,
        p_rr=p[:, 3],
    )


def charges_from_field(field_values) -> np.ndarray:
    """Link charges Q_{i,i+1} = E_{i+1} - E_i for each adjacent rung pair."""
    e = np.asarray(field_values)
    if e.ndim != 1 or len(e) < 2:
        raise ConfigError("need at least two field values to form link charges")
    return np.diff(e)


def _schmidt_entropy(psi: np.ndarray, kept_atoms: int) -> float:
    """von Neumann entropy across the cut keeping the `kept_atoms` lowest
    bits, from the singular values of the reshaped state."""
    n = n_atoms_of(psi)
    mat = psi.reshape(1 << (n - kept_atoms), 1 << kept_atoms)
    sv = np.linalg.svd(mat, compute_uv=False)
    p = sv[sv > SCHMIDT_CUTOFF] ** 2
    if len(p) == 0:
        return 0.0
    return float(-np.sum(p * np.log(p)))


def half_chain_entropy(psi: np.ndarray, geom: LadderGeometry) -> float:
    """Entropy of the left block of rungs 1..(n-1)/2 against the rest.

    The central rung is assigned to the traced-out side; the rung count
    must be odd so the bipartition is well defined.
    """
    if geom.n_rungs % 2 == 0:
        raise ConfigError("half-chain bipartition needs an odd number of rungs")
    check_normalized(psi)
    if n_atoms_of(psi) != geom.n_atoms:
        raise ConfigError("state size does not match the geometry")
    kept_atoms = geom.n_rungs - 1  # 2 * (n_rungs - 1) / 2
    return _schmidt_entropy(psi, kept_atoms)


def entropy_trace(
    spec: HamiltonianSpec,
    psi0: np.ndarray,
    t_max: float,
    n_samples: int,
    *,
    tol: float = DEFAULT_TOL,
    max_dim: int = DEFAULT_MAX_KRYLOV_DIM,
) -> EntropyTrace:
    """Half-chain entropy at uniformly spaced times in [0, t_max]."""
    if spec.geometry is None:
        raise ConfigError("entropy_trace needs a spec built from a ladder geometry")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    geom = spec.geometry
    times = np.unique(np.linspace(0.0, t_max, n_samples))
    traj = krylov_evolve(
        spec,
        psi0,
        t_max,
        record_times=times,
        tol=tol,
        max_dim=max_dim,
        observer=lambda _t, psi: half_chain_entropy(psi, geom),
    )
    return EntropyTrace(times=traj.times, values=np.array(traj.records))


def _sweep_point(args):
    (n_rungs, rho, params, d_over_o, rb_over_a, window, n_samples, tol, max_dim) = args
    rb = blockade_radius(params)
    geom = build_ladder(n_rungs, rb / rb_over_a, rho)
    spec = HamiltonianSpec.from_geometry(
        geom, replace(params, global_detuning=d_over_o * params.rabi_frequency)
    )
    trace = entropy_trace(
        spec, central_excitation_state(geom), window, n_samples, tol=tol, max_dim=max_dim
    )
    return float(trace.values.max())


def max_entropy_sweep(
    base: HamiltonianSpec,
    delta_over_omega,
    rb_over_a,
    window: float,
    *,
    n_samples: int = 61,
    workers: int = 1,
    tol: float = DEFAULT_TOL,
    max_dim: int = DEFAULT_MAX_KRYLOV_DIM,
    progress=None,
) -> PhaseDiagram:
    """Maximum half-chain entropy of the central-excitation quench over a
    (Delta/Omega, R_b/a) grid.

    The blockade ratio is realized by adjusting the lattice spacing at
    fixed Omega and c6.  Grid points are independent and run on a worker
    pool when `workers` > 1; results are deterministic regardless of the
    worker count.
    """
    if base.geometry is None:
        raise ConfigError("sweep needs a spec built from a ladder geometry")
    d_grid = np.asarray(list(delta_over_omega), dtype=float)
    r_grid = np.asarray(list(rb_over_a), dtype=float)
    if len(d_grid) == 0 or len(r_grid) == 0:
        raise ConfigError("sweep grids must be non-empty")
    if np.any(np.diff(d_grid) <= 0) or np.any(np.diff(r_grid) <= 0):
        raise ConfigError("grid axes must increase strictly")
    if window < 0:
        raise ConfigError("window must be >= 0")
    geom = base.geometry
    tasks = [
        (geom.n_rungs, geom.inv_aspect_ratio, base.params, d, r, window, n_samples, tol, max_dim)
        for d in d_grid
        for r in r_grid
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = []
            for i, val in enumerate(pool.map(_sweep_point, tasks)):
                flat.append(val)
                if progress is not None:
                    progress(i + 1, len(tasks))
    else:
        flat = []
        for i, task in enumerate(tasks):
            flat.append(_sweep_point(task))
            if progress is not None:
                progress(i + 1, len(tasks))
    values = np.array(flat).reshape(len(d_grid), len(r_grid))
    return PhaseDiagram(
        delta_over_omega=d_grid, rb_over_a=r_grid, values=values, window=float(window)
    )
