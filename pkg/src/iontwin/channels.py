"""Optical delivery channels and their decibel loss budgets.

Each channel carries light from a fiber through the on-chip coupler, the
routing waveguide and the grating coupler. Losses are kept in dB exactly as
tabulated; conversion to linear power happens only on evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Stage(str, Enum):
    ON_CHIP_COUPLING = "on_chip_coupling"
    PROPAGATION = "propagation"
    GRATING = "grating"
    FIBER_FEEDTHROUGH = "fiber_feedthrough"
    COOLDOWN = "cooldown"


@dataclass(frozen=True)
class LossEntry:
    stage: Stage
    loss_db: float
    inferred: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        if not self.loss_db >= 0:
            raise ValueError(f"loss must be >= 0 dB, got {self.loss_db}")

    @property
    def provenance(self) -> str:
        return "inferred" if self.inferred else "measured"


@dataclass(frozen=True)
class LossLedger:
    entries: tuple[LossEntry, ...]
    propagation_length_cm: float | None = None
    propagation_rate_db_per_cm: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.propagation_length_cm is not None and self.propagation_rate_db_per_cm is not None:
            expected = propagation_loss(self.propagation_rate_db_per_cm, self.propagation_length_cm)
            actual = self.stage_loss(Stage.PROPAGATION)
            if abs(expected - actual) > 0.05:
                raise ValueError(
                    f"propagation entry {actual} dB inconsistent with "
                    f"{self.propagation_rate_db_per_cm} dB/cm x {self.propagation_length_cm} cm")

    def stage_loss(self, stage: Stage) -> float:
        return math.fsum(e.loss_db for e in self.entries if e.stage == Stage(stage))

    @property
    def total(self) -> float:
        return math.fsum(e.loss_db for e in self.entries)


@dataclass(frozen=True)
class OpticalChannel:
    """One wavelength pathway. Powers in W, lengths in m."""

    label: str
    wavelength: float
    fiber_power: float
    waveguide_width: float
    ledger: LossLedger
    grating: str | None = None

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if not self.fiber_power >= 0:
            raise ValueError("fiber_power must be non-negative")
        if not self.waveguide_width > 0:
            raise ValueError("waveguide_width must be positive")


def db_to_linear(loss_db):
    """Power transmission factor for a loss given in dB."""
    return 10.0 ** (-loss_db / 10.0)


def linear_to_db(transmission):
    return -10.0 * math.log10(transmission)


def propagation_loss(rate_db_per_cm: float, length_cm: float) -> float:
    if rate_db_per_cm < 0 or length_cm < 0:
        raise ValueError("rate and length must be non-negative")
    return rate_db_per_cm * length_cm


def total_loss(channel: OpticalChannel) -> float:
    if not channel.ledger.entries:
        raise ValueError(f"channel {channel.label!r} has an empty loss ledger")
    return channel.ledger.total


def delivered_power(channel: OpticalChannel) -> float:
    """Power emitted by the grating toward the ion, in W."""
    return channel.fiber_power * db_to_linear(total_loss(channel))


def ledger_rows(channel: OpticalChannel):
    """Rows ``(stage, loss_db, provenance)`` followed by a total row."""
    rows = [(e.stage.value, e.loss_db, e.provenance) for e in channel.ledger.entries]
    any_inferred = any(e.inferred for e in channel.ledger.entries)
    rows.append(("total", total_loss(channel), "inferred" if any_inferred else "measured"))
    return rows
