"""Event-generator integration boundary.

Parton-level events come in as JSON lines, one event per line:

    {"event_id": 0, "q": 2, "qbar": -2,
     "p_q": [E, px, py, pz], "p_qbar": [E, px, py, pz]}

with all momenta in GeV.  Each event is boosted to its rest frame, its
invariant mass mapped to a detuning, hadronized for a configured number
of shots, and emitted as hadron records.  The file protocol keeps the
simulator independent of any particular generator build.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MalformedEventError
from .hadronize import (
    EventHadrons,
    HadronizationConfig,
    Meson,
    hadronize_event,
)

MASS_SQ_SLACK = 1e-9  # tolerated numerical undershoot of m^2 below zero


@dataclass(frozen=True)
class FourMomentum:
    e: float
    px: float
    py: float
    pz: float

    @classmethod
    def from_seq(cls, seq) -> "FourMomentum":
        if len(seq) != 4:
            raise MalformedEventError(f"four-momentum needs 4 components, got {len(seq)}")
        return cls(*(float(x) for x in seq))

    @property
    def p_sq(self) -> float:
        return self.px**2 + self.py**2 + self.pz**2

    @property
    def mass_sq(self) -> float:
        return self.e**2 - self.p_sq

    def validate(self) -> "FourMomentum":
        if self.e < 0:
            raise MalformedEventError(f"negative energy {self.e}")
        if self.mass_sq < -MASS_SQ_SLACK:
            raise MalformedEventError(
                f"spacelike four-momentum: m^2 = {self.mass_sq} (E < |p|)"
            )
        return self


@dataclass(frozen=True)
class PartonEvent:
    event_id: int
    quark_id: int
    antiquark_id: int
    p_quark: FourMomentum
    p_antiquark: FourMomentum


def invariant_mass(p1: FourMomentum, p2: FourMomentum) -> float:
    """sqrt((E1+E2)^2 - |p1+p2|^2) of the combined system."""
    e = p1.e + p2.e
    px, py, pz = p1.px + p2.px, p1.py + p2.py, p1.pz + p2.pz
    m2 = e**2 - (px**2 + py**2 + pz**2)
    if m2 < -MASS_SQ_SLACK:
        raise MalformedEventError(f"combined invariant mass^2 = {m2} < 0")
    return math.sqrt(max(m2, 0.0))


def _boost(p: FourMomentum, bx: float, by: float, bz: float) -> FourMomentum:
    b2 = bx**2 + by**2 + bz**2
    if b2 == 0.0:
        return p
    gamma = 1.0 / math.sqrt(1.0 - b2)
    bp = bx * p.px + by * p.py + bz * p.pz
    coef = (gamma - 1.0) * bp / b2 - gamma * p.e
    return FourMomentum(
        e=gamma * (p.e - bp),
        px=p.px + coef * bx,
        py=p.py + coef * by,
        pz=p.pz + coef * bz,
    )


def boost_to_rest_frame(
    p1: FourMomentum, p2: FourMomentum
) -> tuple[FourMomentum, FourMomentum]:
    """Boost both momenta into the frame where their sum is at rest."""
    e_tot = p1.e + p2.e
    m = invariant_mass(p1, p2)
    if m <= 0.0 or e_tot <= 0.0:
        raise MalformedEventError("total momentum is lightlike; rest frame undefined")
    bx = (p1.px + p2.px) / e_tot
    by = (p1.py + p2.py) / e_tot
    bz = (p1.pz + p2.pz) / e_tot
    return _boost(p1, bx, by, bz), _boost(p2, bx, by, bz)


# ---------------------------------------------------------------------------
# parsing

@dataclass(frozen=True)
class ParseIssue:
    line_number: int
    message: str


_REQUIRED_KEYS = ("event_id", "q", "qbar", "p_q", "p_qbar")


def parse_events(stream) -> tuple[list[PartonEvent], list[ParseIssue]]:
    """Read JSON-lines parton events; malformed lines are collected as
    issues with their line numbers instead of aborting the stream."""
    events = []
    issues = []
    for line_number, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            events.append(_parse_event_line(line))
        except (MalformedEventError, ValueError, TypeError, KeyError) as exc:
            issues.append(ParseIssue(line_number=line_number, message=str(exc)))
    return events, issues


def _parse_event_line(line: str) -> PartonEvent:
    raw = json.loads(line)
    if not isinstance(raw, dict):
        raise MalformedEventError("event line is not a JSON object")
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise MalformedEventError(f"missing keys: {', '.join(missing)}")
    event_id = raw["event_id"]
    if not isinstance(event_id, int) or event_id < 0:
        raise MalformedEventError(f"event_id must be a non-negative integer, got {event_id!r}")
    p_q = FourMomentum.from_seq(raw["p_q"]).validate()
    p_qbar = FourMomentum.from_seq(raw["p_qbar"]).validate()
    if invariant_mass(p_q, p_qbar) <= 0.0:
        raise MalformedEventError("combined system has no positive invariant mass")
    return PartonEvent(
        event_id=event_id,
        quark_id=int(raw["q"]),
        antiquark_id=int(raw["qbar"]),
        p_quark=p_q,
        p_antiquark=p_qbar,
    )


# ---------------------------------------------------------------------------
# pipeline

@dataclass
class HadronRecord:
    """One retained shot of one event, ready for serialization."""

    event_id: int
    shot_id: int
    multiplicity: int
    mesons: list[Meson]
    rr_violations: int
    e_cm: float
    delta_over_omega: float
    t_f: float

    def to_json_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "shot_id": self.shot_id,
            "multiplicity": self.multiplicity,
            "mesons": [m.to_json_dict() for m in self.mesons],
            "rr_violations": self.rr_violations,
            "e_cm_gev": float(self.e_cm),
            "delta_over_omega": float(self.delta_over_omega),
            "t_f_us": float(self.t_f),
        }


@dataclass
class MultiplicityHistogram:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / self.total

    @property
    def mean(self) -> float:
        if self.total == 0:
            return 0.0
        return float(np.average(np.arange(len(self.counts)), weights=self.counts))


@dataclass
class EventFailure:
    event_id: int
    message: str


@dataclass
class PipelineResult:
    records: list[HadronRecord]
    histogram: MultiplicityHistogram
    failures: list[EventFailure] = field(default_factory=list)


def event_seed(master_seed: int, event_id: int) -> int:
    """Deterministic per-event RNG seed, independent of scheduling."""
    return int(np.random.SeedSequence([master_seed, event_id]).generate_state(1)[0])


def _run_one(args) -> tuple[int, EventHadrons]:
    event, config, n_shots, master_seed = args
    p1, p2 = boost_to_rest_frame(event.p_quark, event.p_antiquark)
    e_cm = p1.e + p2.e
    result = hadronize_event(e_cm, config, n_shots, event_seed(master_seed, event.event_id))
    return event.event_id, result


def run_pipeline(
    events: list[PartonEvent],
    config: HadronizationConfig,
    n_shots: int,
    seed: int,
    *,
    workers: int = 1,
    progress=None,
) -> PipelineResult:
    """Hadronize every event and aggregate the multiplicity histogram.

    Events are independent; with `workers` > 1 they run on a process
    pool, and the output ordering (by event_id, then shot_id) and all
    values are identical to a serial run.  A failing event is recorded
    and skipped without aborting the rest.
    """
    if n_shots < 1:
        raise ConfigError(f"n_shots must be >= 1, got {n_shots}")
    ordered = sorted(events, key=lambda ev: ev.event_id)
    tasks = [(ev, config, n_shots, seed) for ev in ordered]
    outcomes: list[tuple[int, EventHadrons] | EventFailure] = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, task) for task in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    outcomes.append(fut.result())
                except Exception as exc:
                    outcomes.append(EventFailure(task[0].event_id, str(exc)))
                if progress is not None:
                    progress(len(outcomes), len(tasks))
    else:
        for task in tasks:
            try:
                outcomes.append(_run_one(task))
            except Exception as exc:
                outcomes.append(EventFailure(task[0].event_id, str(exc)))
            if progress is not None:
                progress(len(outcomes), len(tasks))

    records = []
    failures = []
    max_mult = 0
    for outcome in outcomes:
        if isinstance(outcome, EventFailure):
            failures.append(outcome)
            continue
        event_id, result = outcome
        for shot in result.retained_shots:
            records.append(
                HadronRecord(
                    event_id=event_id,
                    shot_id=shot.shot_id,
                    multiplicity=shot.multiplicity,
                    mesons=shot.mesons,
                    rr_violations=shot.rr_violations,
                    e_cm=result.e_cm,
                    delta_over_omega=result.delta_over_omega,
                    t_f=result.t_f,
                )
            )
            max_mult = max(max_mult, shot.multiplicity)
    records.sort(key=lambda r: (r.event_id, r.shot_id))
    counts = np.zeros(max_mult + 1, dtype=int) if records else np.zeros(0, dtype=int)
    for rec in records:
        counts[rec.multiplicity] += 1
    return PipelineResult(
        records=records,
        histogram=MultiplicityHistogram(counts=counts),
        failures=failures,
    )
