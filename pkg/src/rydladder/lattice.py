"""Ladder geometry, drive parameters, and pairwise van der Waals couplings.

Unit system: lengths in micrometers, times in microseconds, and all
energies/frequencies as angular frequencies in rad/us with hbar = 1.
The default drive and interaction constants correspond to Rb-87 in the
|70 S_1/2> Rydberg state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TAU = 2.0 * math.pi

DEFAULT_RABI_FREQUENCY = 4.0 * math.pi      # rad/us
DEFAULT_C6 = 862690.0 * TAU                 # rad um^6 / us
DEFAULT_INV_ASPECT_RATIO = 2.0

# leg labels inside one rung; atom index = 2*(rung-1) + leg
TOP = 0
BOTTOM = 1


@dataclass(frozen=True)
class PhysicalParams:
    """Global drive parameters of the atom array.

    Attributes
    ----------
    rabi_frequency : float
        Rabi frequency of the ground-Rydberg drive (rad/us), > 0.
    global_detuning : float
        Global laser detuning (rad/us); enters the energy with a minus
        sign, so positive values favour excitation.
    c6 : float
        van der Waals interaction constant (rad um^6 / us), > 0.
    """

    rabi_frequency: float = DEFAULT_RABI_FREQUENCY
    global_detuning: float = 0.0
    c6: float = DEFAULT_C6

    def __post_init__(self):
        if not self.rabi_frequency > 0.0:
            raise ConfigError(f"rabi_frequency must be > 0, got {self.rabi_frequency}")
        if not self.c6 > 0.0:
            raise ConfigError(f"c6 must be > 0, got {self.c6}")


@dataclass(eq=False)
class LadderGeometry:
    """Two-leg ladder of 2*n_rungs atoms in the plane.

    Rung j (1-based) has its two atoms at x = (j-1)*a, the top atom at
    y = 0 and the bottom atom at y = h = rho*a.  Atom indices follow
    atom(j, leg) = 2*(j-1) + leg with leg in {TOP=0, BOTTOM=1}.
    """

    n_rungs: int
    lattice_spacing: float
    inv_aspect_ratio: float
    positions: np.ndarray = field(repr=False)

    @property
    def n_atoms(self) -> int:
        return 2 * self.n_rungs

    @property
    def rung_spacing(self) -> float:
        """Vertical distance h between the two atoms of a rung."""
        return self.inv_aspect_ratio * self.lattice_spacing

    @property
    def center(self) -> float:
        """Ladder midpoint in rung units (fractional for even n_rungs)."""
        return 0.5 * (self.n_rungs + 1)

    @property
    def half_length(self) -> float:
        """Distance from the midpoint to either end, in rungs."""
        return 0.5 * (self.n_rungs - 1)

    @property
    def staggering(self) -> np.ndarray:
        """Per-rung sign (-1)^(j+1): +1 on odd rungs, -1 on even rungs."""
        return np.array([1 if j % 2 == 1 else -1 for j in range(1, self.n_rungs + 1)])

    def atom_index(self, rung: int, leg: int) -> int:
        if not (1 <= rung <= self.n_rungs) or leg not in (TOP, BOTTOM):
            raise ConfigError(f"no atom at rung {rung}, leg {leg}")
        return 2 * (rung - 1) + leg

    def rung_atoms(self, rung: int) -> tuple[int, int]:
        """(top, bottom) atom indices of a rung."""
        return self.atom_index(rung, TOP), self.atom_index(rung, BOTTOM)


def build_ladder(
    n_rungs: int,
    lattice_spacing: float,
    inv_aspect_ratio: float = DEFAULT_INV_ASPECT_RATIO,
) -> LadderGeometry:
    """Construct the two-leg ladder geometry.

    Parameters
    ----------
    n_rungs : int
        Number of rungs, >= 1.
    lattice_spacing : float
        Horizontal spacing a between neighbouring rungs (um), > 0.
    inv_aspect_ratio : float
        rho = h/a, ratio of the intra-rung distance to the lattice
        spacing, > 0.
    """
    if n_rungs < 1:
        raise ConfigError(f"n_rungs must be >= 1, got {n_rungs}")
    if not lattice_spacing > 0.0:
        raise ConfigError(f"lattice_spacing must be > 0, got {lattice_spacing}")
    if not inv_aspect_ratio > 0.0:
        raise ConfigError(f"inv_aspect_ratio must be > 0, got {inv_aspect_ratio}")
    h = inv_aspect_ratio * lattice_spacing
    positions = np.zeros((2 * n_rungs, 2))
    for j in range(n_rungs):
        positions[2 * j] = ((j * lattice_spacing), 0.0)
        positions[2 * j + 1] = ((j * lattice_spacing), h)
    return LadderGeometry(
        n_rungs=n_rungs,
        lattice_spacing=float(lattice_spacing),
        inv_aspect_ratio=float(inv_aspect_ratio),
        positions=positions,
    )


def blockade_radius(params: PhysicalParams) -> float:
    """Distance at which the pair interaction equals the Rabi frequency,
    (c6/Omega)^(1/6)."""
    return (params.c6 / params.rabi_frequency) ** (1.0 / 6.0)


def pair_potential(params: PhysicalParams, r: float) -> float:
    """van der Waals interaction c6 / r^6 between two excited atoms."""
    if r == 0.0:
        raise ConfigError("pair_potential is singular at r = 0 (coincident atoms)")
    return params.c6 / r**6


def interaction_matrix(positions: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Symmetric (N, N) matrix of pair interactions, zero on the diagonal."""
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    if n == 1:
        return np.zeros((1, 1))
    diff = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(r2, 1.0)  # avoid 0/0; diagonal is zeroed below
    v = params.c6 / r2**3
    np.fill_diagonal(v, 0.0)
    return v


def interaction_table(
    geom: LadderGeometry, params: PhysicalParams
) -> dict[tuple[int, int], float]:
    """All-pairs interaction strengths keyed by (i, j) with i < j.

    Every unordered atom pair appears exactly once; no distance cutoff
    is applied.
    """
    v = interaction_matrix(geom.positions, params)
    n = geom.n_atoms
    return {(i, j): float(v[i, j]) for i in range(n) for j in range(i + 1, n)}
