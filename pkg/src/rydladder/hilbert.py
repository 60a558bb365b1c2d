"""Basis indexing, state vectors, and matrix-free application of the
ladder Hamiltonian.

Basis convention: computational basis states are bitmasks over the N
atoms, little-endian, with bit b set iff atom b is in the Rydberg state.
This ordering is fixed; measurement shots, entropy bipartitions, and the
field decoding all rely on it.

H = (Omega/2) sum_j (|g_j><r_j| + h.c.)  -  sum_j (Delta + delta_j) n_j
    + sum_{j<k} V_jk n_j n_k
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np

from .errors import CapacityError, ConfigError, NormalizationError
from .lattice import LadderGeometry, PhysicalParams, interaction_matrix

MAX_ATOMS = 26          # 2^26 amplitudes; largest supported system
DENSE_MAX_ATOMS = 12    # explicit-matrix oracle limit

NORM_TOL = 1e-6


def check_normalized(psi: np.ndarray, tol: float = NORM_TOL) -> None:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise NormalizationError(f"state norm {norm!r} differs from 1 by more than {tol}")


def n_atoms_of(psi: np.ndarray) -> int:
    """Number of atoms encoded by a state vector of length 2^N."""
    dim = len(psi)
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ConfigError(f"state length {dim} is not a power of two")
    return n


@dataclass(eq=False)
class HamiltonianSpec:
    """Immutable description of one ladder Hamiltonian.

    Built from atom positions so that degenerate systems (e.g. a single
    driven atom) can be described directly; use `from_geometry` for
    ladders.  `geometry` is retained when available so observables that
    need the rung structure (fields, entropy) can find it.
    """

    positions: np.ndarray
    params: PhysicalParams
    local_detunings: np.ndarray | None = None
    geometry: LadderGeometry | None = field(default=None, repr=False)
    max_atoms: int = MAX_ATOMS

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        n = self.positions.shape[0]
        if n > self.max_atoms:
            raise CapacityError(
                f"{n} atoms exceeds the configured maximum of {self.max_atoms}"
            )
        if self.local_detunings is None:
            self.local_detunings = np.zeros(n)
        else:
            self.local_detunings = np.asarray(self.local_detunings, dtype=float)
            if self.local_detunings.shape != (n,):
                raise ConfigError(
                    f"local_detunings must have length {n}, got {self.local_detunings.shape}"
                )

    @classmethod
    def from_geometry(
        cls,
        geom: LadderGeometry,
        params: PhysicalParams,
        local_detunings: np.ndarray | None = None,
        max_atoms: int = MAX_ATOMS,
    ) -> "HamiltonianSpec":
        return cls(
            positions=geom.positions,
            params=params,
            local_detunings=local_detunings,
            geometry=geom,
            max_atoms=max_atoms,
        )

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return 1 << self.n_atoms

    @cached_property
    def interactions(self) -> np.ndarray:
        return interaction_matrix(self.positions, self.params)

    @cached_property
    def diagonal(self) -> np.ndarray:
        return _build_diagonal(
            self.n_atoms,
            self.params.global_detuning + self.local_detunings,
            self.interactions,
        )


def _bit_slices(n_atoms: int, *bits: int):
    """Index tuple selecting, in the (2,)*N view of a state vector, the
    block where all given atom bits are 1.  Axis N-1-b hosts bit b."""
    sel = [slice(None)] * n_atoms
    for b in bits:
        sel[n_atoms - 1 - b] = 1
    return tuple(sel)


def _build_diagonal(n_atoms: int, detunings: np.ndarray, v: np.ndarray) -> np.ndarray:
    diag = np.zeros(1 << n_atoms)
    nd = diag.reshape((2,) * n_atoms)
    for j in range(n_atoms):
        nd[_bit_slices(n_atoms, j)] -= detunings[j]
        for k in range(j + 1, n_atoms):
            nd[_bit_slices(n_atoms, j, k)] += v[j, k]
    return diag


def diagonal_energies(spec: HamiltonianSpec) -> np.ndarray:
    """Diagonal of H in the computational basis: for basis state s,
    -sum_j (Delta + delta_j) n_j(s) + sum_{j<k} V_jk n_j(s) n_k(s)."""
    return spec.diagonal


# serial on purpose: parallel workqueue threads busy-spin between calls
# and starve the interleaved numpy work in the Lanczos recurrence
@numba.njit(cache=True)
def _matvec_kernel(diag, psi, half_omega, n_atoms):  # pragma: no cover - jitted
    dim = psi.shape[0]
    out = np.empty_like(psi)
    for i in range(dim):
        acc = 0.0j
        for j in range(n_atoms):
            acc += psi[i ^ (1 << j)]
        out[i] = diag[i] * psi[i] + half_omega * acc
    return out


def hamiltonian_matvec(
    diag: np.ndarray, psi: np.ndarray, half_omega: float, n_atoms: int
) -> np.ndarray:
    """diag * psi plus the single-bit-flip drive, in one fused pass."""
    return _matvec_kernel(diag, np.ascontiguousarray(psi, dtype=complex), half_omega, n_atoms)


def apply_hamiltonian(spec: HamiltonianSpec, psi: np.ndarray) -> np.ndarray:
    """H @ psi without forming H.

    The diagonal part comes from `diagonal_energies`; the drive couples
    every pair of basis states differing in exactly one bit with
    amplitude Omega/2.  The result is generally unnormalized.
    """
    psi = np.asarray(psi)
    if psi.shape != (spec.dim,):
        raise ConfigError(f"state has length {psi.shape}, expected ({spec.dim},)")
    return hamiltonian_matvec(spec.diagonal, psi, 0.5 * spec.params.rabi_frequency, spec.n_atoms)


def dense_matrix(spec: HamiltonianSpec) -> np.ndarray:
    """Explicit Hermitian matrix of H; test oracle for small systems."""
    n = spec.n_atoms
    if n > DENSE_MAX_ATOMS:
        raise CapacityError(f"dense oracle limited to {DENSE_MAX_ATOMS} atoms, got {n}")
    dim = 1 << n
    mat = np.diag(spec.diagonal).astype(complex)
    half = 0.5 * spec.params.rabi_frequency
    idx = np.arange(dim)
    for j in range(n):
        mat[idx ^ (1 << j), idx] += half
    return mat


def occupancy_expectations(psi: np.ndarray) -> np.ndarray:
    """Per-atom Rydberg occupation <n_j> of a normalized state."""
    check_normalized(psi)
    n = n_atoms_of(psi)
    probs = np.abs(psi) ** 2
    occ = np.empty(n)
    for j in range(n):
        occ[j] = probs.reshape(-1, 2, 1 << j)[:, 1, :].sum()
    return occ


class TruncatedBasis:
    """Blockade-truncated basis: keeps only bitmasks with no two excited
    atoms closer than `cutoff`.

    This is an approximation (the full Hamiltonian has no hard
    constraint); it is provided for speed on large ladders and must be
    validated against the full space on small systems.  With a cutoff
    below the minimum pair distance it reproduces the full basis
    exactly.
    """

    def __init__(self, positions: np.ndarray, cutoff: float):
        pos = np.asarray(positions, dtype=float).reshape(-1, 2)
        n = pos.shape[0]
        if n > MAX_ATOMS:
            raise CapacityError(f"{n} atoms exceeds the maximum of {MAX_ATOMS}")
        self.n_atoms = n
        self.cutoff = float(cutoff)
        conflicts = np.zeros(n, dtype=np.int64)
        for j in range(1, n):
            d = np.linalg.norm(pos[:j] - pos[j], axis=1)
            conflicts[j] = int(np.sum((1 << np.nonzero(d < cutoff)[0]).astype(np.int64)))
        states = np.zeros(1, dtype=np.int64)
        for j in range(n):
            ok = (states & conflicts[j]) == 0
            states = np.concatenate([states, states[ok] | (1 << j)])
        states.sort()
        self.states = states
        # flip[i, j]: position of states[i] ^ (1<<j) in `states`, or -1
        flip = np.empty((len(states), n), dtype=np.int64)
        for j in range(n):
            partner = states ^ (1 << j)
            pos_j = np.searchsorted(states, partner)
            pos_j = np.clip(pos_j, 0, len(states) - 1)
            valid = states[pos_j] == partner
            flip[:, j] = np.where(valid, pos_j, -1)
        self._flip = flip

    @classmethod
    def from_geometry(cls, geom: LadderGeometry, cutoff: float) -> "TruncatedBasis":
        return cls(geom.positions, cutoff)

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def full_dim(self) -> int:
        return 1 << self.n_atoms

    def project(self, psi_full: np.ndarray) -> np.ndarray:
        """Restrict a full-space vector to the kept states (no renormalization)."""
        return np.asarray(psi_full)[self.states].copy()

    def embed(self, psi: np.ndarray) -> np.ndarray:
        """Zero-pad a truncated vector back into the full space."""
        out = np.zeros(self.full_dim, dtype=complex)
        out[self.states] = psi
        return out

    def diagonal_energies(self, spec: HamiltonianSpec) -> np.ndarray:
        self._check(spec)
        det = spec.params.global_detuning + spec.local_detunings
        v = spec.interactions
        diag = np.zeros(self.size)
        bits = [(self.states >> j) & 1 for j in range(self.n_atoms)]
        for j in range(self.n_atoms):
            diag -= det[j] * bits[j]
            for k in range(j + 1, self.n_atoms):
                diag += v[j, k] * (bits[j] & bits[k])
        return diag

    def apply_hamiltonian(self, spec: HamiltonianSpec, psi: np.ndarray, diag=None) -> np.ndarray:
        """Projected Hamiltonian P H P applied to a truncated vector."""
        self._check(spec)
        if diag is None:
            diag = self.diagonal_energies(spec)
        out = diag * psi
        half = 0.5 * spec.params.rabi_frequency
        for j in range(self.n_atoms):
            idx = self._flip[:, j]
            ok = idx >= 0
            out[ok] += half * psi[idx[ok]]
        return out

    def _check(self, spec: HamiltonianSpec) -> None:
        if spec.n_atoms != self.n_atoms:
            raise ConfigError(
                f"basis built for {self.n_atoms} atoms, spec has {spec.n_atoms}"
            )
