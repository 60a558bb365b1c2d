"""Shot sampling, staggered decoding, string extraction, and conversion
of strings into meson records.

A measured bitmask decodes rung by rung into field values in {-1,0,+1}.
Two policies handle outcomes outside the spin-1 subspace:

* ``"zero"`` (default): doubly excited rungs map to E = 0 and are
  counted; every shot stays usable.
* ``"discard"`` (strict): shots are rejected whenever the excitation
  pattern cannot be represented as a valid spin-1 field configuration,
  i.e. when a rung is doubly excited or two excited atoms sit on the
  same leg of adjacent rungs (the patterns that would produce link
  charges |Q| = 2).  Decoded strict shots therefore satisfy the Gauss
  bound |Q| <= 1 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, KinematicsError
from .hilbert import HamiltonianSpec, check_normalized
from .lattice import LadderGeometry, PhysicalParams
from .propagate import (
    DEFAULT_MAX_KRYLOV_DIM,
    DEFAULT_TOL,
    central_excitation_state,
    krylov_evolve,
)

RR_POLICIES = ("zero", "discard")

# measurement time for the reference 13-rung ladder; other sizes scale
# linearly with the half-chain length (the excitation front speed is
# roughly size-independent)
REFERENCE_T_F = 0.35
REFERENCE_HALF_LENGTH = 6.0


@dataclass(frozen=True)
class Shot:
    """One projective measurement outcome with its RNG provenance."""

    bitmask: int
    seed: int
    index: int


@dataclass
class FieldConfig:
    """Decoded per-rung field values plus the count of doubly excited
    rungs that were zeroed during decoding."""

    fields: np.ndarray
    rr_violations: int = 0


@dataclass(frozen=True)
class StringSegment:
    """Maximal run of identical nonzero field values (rungs inclusive,
    1-based)."""

    start_rung: int
    end_rung: int
    sign: int

    @property
    def length(self) -> int:
        return self.end_rung - self.start_rung + 1


@dataclass(frozen=True)
class Meson:
    """A string segment converted to a hadron."""

    length: int
    energy: float          # GeV
    velocity: float        # fraction of the maximal signal speed, in [-1, 1]
    mass: float            # GeV
    charge_left: int       # link charge at the left boundary (+sign)
    charge_right: int      # link charge at the right boundary (-sign)
    start_rung: int
    end_rung: int
    center: float          # rung units relative to the ladder midpoint

    def to_json_dict(self) -> dict:
        return {
            "length": self.length,
            "energy_gev": float(self.energy),
            "velocity": float(self.velocity),
            "mass_gev": float(self.mass),
            "center_rung": float(self.center),
            "start_rung": self.start_rung,
            "end_rung": self.end_rung,
        }


@dataclass(frozen=True)
class EnergyDetuningCalibration:
    """Affine, decreasing map from event energy (GeV) to Delta/Omega.

    Energies at or below `e_lo` map to `delta_hi`, at or above `e_hi`
    to `delta_lo`; values in between interpolate linearly.
    """

    e_lo: float = 1.0
    e_hi: float = 10.0
    delta_lo: float = 2.0
    delta_hi: float = 3.0

    def __post_init__(self):
        if not self.e_lo < self.e_hi:
            raise ConfigError("calibration requires e_lo < e_hi")
        if not self.delta_lo < self.delta_hi:
            raise ConfigError("calibration requires delta_lo < delta_hi")


DEFAULT_CALIBRATION = EnergyDetuningCalibration()


def detuning_from_energy(e_cm: float, calibration: EnergyDetuningCalibration) -> float:
    """Delta/Omega for a given centre-of-mass energy, clamped to the
    calibrated range."""
    c = calibration
    frac = (e_cm - c.e_lo) / (c.e_hi - c.e_lo)
    return float(np.clip(c.delta_hi - (c.delta_hi - c.delta_lo) * frac, c.delta_lo, c.delta_hi))


def default_measurement_time(n_rungs: int) -> float:
    """t_f scaled so excitations reach the boundary at measurement."""
    half = 0.5 * (n_rungs - 1)
    return REFERENCE_T_F * half / REFERENCE_HALF_LENGTH


# ---------------------------------------------------------------------------
# sampling and decoding

def sample_shots(psi: np.ndarray, n_shots: int, seed: int) -> list[Shot]:
    """Draw i.i.d. Born-rule samples from |psi|^2; reproducible per seed."""
    check_normalized(psi)
    if n_shots < 1:
        raise ConfigError(f"n_shots must be >= 1, got {n_shots}")
    probs = np.abs(psi) ** 2
    probs /= probs.sum()
    rng = np.random.default_rng(seed)
    drawn = rng.choice(len(probs), size=n_shots, p=probs)
    return [Shot(bitmask=int(b), seed=seed, index=i) for i, b in enumerate(drawn)]


def _has_same_leg_neighbors(mask: int, n_rungs: int) -> bool:
    """True when two excited atoms occupy the same leg of adjacent rungs."""
    for j in range(n_rungs - 1):
        for leg in (0, 1):
            if mask >> (2 * j + leg) & 1 and mask >> (2 * (j + 1) + leg) & 1:
                return True
    return False


def decode_shot(shot: Shot, geom: LadderGeometry, policy: str = "zero") -> FieldConfig | None:
    """Decode a shot into per-rung field values via the staggered mapping.

    Returns None for shots rejected under the ``"discard"`` policy.
    """
    if policy not in RR_POLICIES:
        raise ConfigError(f"unknown rr policy {policy!r}; expected one of {RR_POLICIES}")
    mask = shot.bitmask
    if not 0 <= mask < (1 << geom.n_atoms):
        raise ConfigError(f"bitmask {mask} outside the {geom.n_atoms}-atom basis")
    n = geom.n_rungs
    fields = np.zeros(n, dtype=np.int8)
    violations = 0
    for j in range(1, n + 1):
        top, bottom = geom.rung_atoms(j)
        t = mask >> top & 1
        b = mask >> bottom & 1
        if t and b:
            if policy == "discard":
                return None
            violations += 1
            continue
        fields[j - 1] = (t - b) * (1 if j % 2 == 1 else -1)
    if policy == "discard" and _has_same_leg_neighbors(mask, n):
        return None
    return FieldConfig(fields=fields, rr_violations=violations)


def extract_strings(cfg: FieldConfig) -> list[StringSegment]:
    """Maximal contiguous runs of identical nonzero field values, left to
    right; zero-field rungs belong to no string."""
    strings = []
    start = None
    current = 0
    for i, v in enumerate(np.append(cfg.fields, 0)):
        if v == current:
            continue
        if current != 0:
            strings.append(StringSegment(start_rung=start + 1, end_rung=i, sign=int(current)))
        start = i if v != 0 else None
        current = int(v)
    return strings


# ---------------------------------------------------------------------------
# strings -> mesons

def apportion_energy(strings: list[StringSegment], total_energy: float) -> np.ndarray:
    """Split the event energy across strings in proportion to their
    lengths; the last share absorbs rounding so the sum is exact."""
    if total_energy <= 0:
        raise ConfigError(f"total_energy must be > 0, got {total_energy}")
    if not strings:
        return np.zeros(0)
    lengths = np.array([s.length for s in strings], dtype=float)
    energies = total_energy * lengths / lengths.sum()
    energies[-1] = total_energy - energies[:-1].sum()
    return energies


def meson_kinematics(
    segment: StringSegment, energy: float, geom: LadderGeometry, t_f: float
) -> Meson:
    """Assign endpoint charges, velocity, and mass to one string.

    Endpoint link charges follow Gauss' law across the string
    boundaries (vacuum outside): +sign on the left, -sign on the right.
    The velocity is the mean endpoint displacement from the ladder
    midpoint divided by the half-chain length; the mass follows from
    the relativistic energy-mass relation.
    """
    if energy <= 0:
        raise ConfigError(f"meson energy must be > 0, got {energy}")
    center = geom.center
    half = geom.half_length
    d_left = segment.start_rung - center
    d_right = segment.end_rung - center
    mean_disp = 0.5 * (d_left + d_right)
    v = mean_disp / half if half > 0 else 0.0
    if abs(v) > 1.0 + 1e-12:
        raise KinematicsError(
            f"string at rungs {segment.start_rung}..{segment.end_rung} yields |v| = "
            f"{abs(v)} > 1 (is t_f = {t_f} consistent with the ladder size?)"
        )
    v = float(np.clip(v, -1.0, 1.0))
    return Meson(
        length=segment.length,
        energy=float(energy),
        velocity=v,
        mass=float(energy) * math.sqrt(1.0 - v * v),
        charge_left=segment.sign,
        charge_right=-segment.sign,
        start_rung=segment.start_rung,
        end_rung=segment.end_rung,
        center=float(mean_disp),
    )


# ---------------------------------------------------------------------------
# full per-event pipeline

@dataclass
class HadronizationConfig:
    """Run parameters for converting one event energy into hadrons."""

    geometry: LadderGeometry
    params: PhysicalParams
    calibration: EnergyDetuningCalibration = DEFAULT_CALIBRATION
    t_f: float | None = None
    rr_policy: str = "zero"
    tolerance: float = DEFAULT_TOL
    max_krylov_dim: int = DEFAULT_MAX_KRYLOV_DIM

    def __post_init__(self):
        if self.rr_policy not in RR_POLICIES:
            raise ConfigError(
                f"unknown rr policy {self.rr_policy!r}; expected one of {RR_POLICIES}"
            )
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be > 0")

    def measurement_time(self) -> float:
        if self.t_f is not None:
            return self.t_f
        return default_measurement_time(self.geometry.n_rungs)


@dataclass
class ShotHadrons:
    shot_id: int
    mesons: list[Meson]
    rr_violations: int
    rejected: bool = False

    @property
    def multiplicity(self) -> int:
        return len(self.mesons)


@dataclass
class EventHadrons:
    """All shots of one hadronized event plus the settings that produced
    them."""

    e_cm: float
    delta_over_omega: float
    t_f: float
    rr_policy: str
    shots: list[ShotHadrons] = field(default_factory=list)

    @property
    def retained_shots(self) -> list[ShotHadrons]:
        return [s for s in self.shots if not s.rejected]

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([s.multiplicity for s in self.retained_shots], dtype=int)

    def multiplicity_counts(self) -> np.ndarray:
        m = self.multiplicities
        return np.bincount(m) if len(m) else np.zeros(0, dtype=int)


def shot_to_hadrons(
    shot: Shot, cfg: HadronizationConfig, e_cm: float, t_f: float
) -> ShotHadrons:
    decoded = decode_shot(shot, cfg.geometry, cfg.rr_policy)
    if decoded is None:
        return ShotHadrons(shot_id=shot.index, mesons=[], rr_violations=0, rejected=True)
    strings = extract_strings(decoded)
    energies = apportion_energy(strings, e_cm) if strings else np.zeros(0)
    mesons = [
        meson_kinematics(s, e, cfg.geometry, t_f) for s, e in zip(strings, energies)
    ]
    return ShotHadrons(
        shot_id=shot.index, mesons=mesons, rr_violations=decoded.rr_violations
    )


def hadronize_event(
    e_cm: float, config: HadronizationConfig, n_shots: int, seed: int
) -> EventHadrons:
    """Run one event energy through the full chain: map the energy to a
    detuning, quench the central-excitation state to the measurement
    time, sample shots, decode, extract strings, and assign kinematics."""
    if e_cm <= 0:
        raise ConfigError(f"event energy must be > 0, got {e_cm}")
    d_over_o = detuning_from_energy(e_cm, config.calibration)
    params = replace(
        config.params, global_detuning=d_over_o * config.params.rabi_frequency
    )
    spec = HamiltonianSpec.from_geometry(config.geometry, params)
    psi0 = central_excitation_state(config.geometry)
    t_f = config.measurement_time()
    traj = krylov_evolve(
        spec,
        psi0,
        t_f,
        record_times=[],
        tol=config.tolerance,
        max_dim=config.max_krylov_dim,
    )
    shots = sample_shots(traj.final_state, n_shots, seed)
    event = EventHadrons(
        e_cm=float(e_cm), delta_over_omega=d_over_o, t_f=t_f, rr_policy=config.rr_policy
    )
    event.shots = [shot_to_hadrons(s, config, e_cm, t_f) for s in shots]
    return event
