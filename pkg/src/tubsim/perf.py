"""Calibrated energy, iso-area throughput and workload reports.

Energy is ``cycles * clock_period_ns * power_mw`` and comes out in pJ
(mW * ns = pJ) with no other unit handling. Area is compared only as a ratio
between design points sharing an ``area_unit``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .arith import Precision
from .errors import CalibrationError, TextFormatError, ValidationError
from .profiler import LatencyProfile

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w

__all__ = [
    "DesignPoint",
    "Claim",
    "Calibration",
    "EnergyReport",
    "IsoAreaThroughput",
    "Projection",
    "WorkloadReport",
    "load_calibration",
    "save_calibration",
    "default_calibration",
    "energy",
    "iso_area_throughput",
    "energy_gap",
    "project_iso_area_throughput",
    "workload_report",
    "report_to_text",
    "report_to_csv",
]

DESIGNS = ("binary", "tub")
# absorbs float noise in ratios such as 0.09 / 0.018 before flooring
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class DesignPoint:
    design: str
    precision: Precision
    k: int
    n: int
    area: float
    power_mw: float
    area_unit: str = "reported-um2"
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "precision", Precision.parse(self.precision))
        if self.design not in DESIGNS:
            raise ValidationError(f"design must be one of {DESIGNS}, got {self.design!r}")
        if not (self.area > 0 and self.power_mw > 0):
            raise ValidationError(f"area and power must be positive for {self.key}")
        if self.k < 1 or self.n < 1:
            raise ValidationError("geometry must be positive")

    @property
    def key(self) -> tuple[str, str, int, int]:
        return (self.design, self.precision.label, self.k, self.n)

    @property
    def label(self) -> str:
        return f"{self.design} {self.precision.label} {self.k}x{self.n}"

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["precision"] = self.precision.label
        return rec


@dataclass(frozen=True)
class Claim:
    name: str
    value: float
    source: str = ""


@dataclass
class Calibration:
    design_points: list[DesignPoint] = field(default_factory=list)
    claims: dict[str, Claim] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for dp in self.design_points:
            if dp.key in seen:
                raise CalibrationError(f"duplicate design point {dp.label}")
            seen.add(dp.key)

    def lookup(self, design: str, precision, k: int, n: int) -> DesignPoint:
        key = (design, Precision.parse(precision).label, k, n)
        for dp in self.design_points:
            if dp.key == key:
                return dp
        raise CalibrationError(
            f"no calibration entry for design point {design} {key[1]} {k}x{n}"
        )

    def pair(self, precision, k: int, n: int) -> tuple[DesignPoint, DesignPoint]:
        return self.lookup("binary", precision, k, n), self.lookup("tub", precision, k, n)

    def claim(self, name: str) -> Optional[Claim]:
        return self.claims.get(name)

    def to_text(self) -> str:
        doc = {
            "design_point": [dp.to_record() for dp in self.design_points],
            "claim": [asdict(c) for c in self.claims.values()],
        }
        return tomli_w.dumps(doc)

    @classmethod
    def from_text(cls, text: str) -> "Calibration":
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise TextFormatError(f"malformed calibration file: {exc}") from exc
        points = []
        for rec in doc.get("design_point", []):
            try:
                points.append(DesignPoint(
                    design=rec["design"],
                    precision=rec["precision"],
                    k=int(rec["k"]),
                    n=int(rec["n"]),
                    area=float(rec["area"]),
                    power_mw=float(rec["power_mw"]),
                    area_unit=str(rec.get("area_unit", "reported-um2")),
                    source=str(rec.get("source", "")),
                ))
            except KeyError as exc:
                raise TextFormatError(f"design point record missing field {exc}") from None
        claims = {}
        for rec in doc.get("claim", []):
            c = Claim(str(rec["name"]), float(rec["value"]), str(rec.get("source", "")))
            claims[c.name] = c
        return cls(points, claims)


def load_calibration(path: Union[str, Path, None] = None) -> Calibration:
    """Load a calibration file; ``None`` loads the shipped default table."""
    if path is None:
        text = resources.files("tubsim").joinpath("data/calibration.toml").read_text()
    else:
        text = Path(path).read_text()
    return Calibration.from_text(text)


def default_calibration() -> Calibration:
    return load_calibration(None)


def save_calibration(cal: Calibration, path: Union[str, Path]) -> None:
    Path(path).write_text(cal.to_text())


@dataclass(frozen=True)
class EnergyReport:
    design_point: DesignPoint
    cycles: float
    clock_period_ns: float
    energy_pj: float


def energy(dp: DesignPoint, cycles: float, period_ns: float) -> EnergyReport:
    if not period_ns > 0:
        raise ValidationError(f"clock period must be positive, got {period_ns}")
    if cycles < 0:
        raise ValidationError(f"cycles must be non-negative, got {cycles}")
    return EnergyReport(dp, float(cycles), float(period_ns), cycles * period_ns * dp.power_mw)


@dataclass(frozen=True)
class IsoAreaThroughput:
    """How many tub arrays fit in one binary array's footprint."""

    multiple: int
    ratio: float


def iso_area_throughput(binary_dp: DesignPoint, tub_dp: DesignPoint) -> IsoAreaThroughput:
    if binary_dp.precision != tub_dp.precision or (binary_dp.k, binary_dp.n) != (tub_dp.k, tub_dp.n):
        raise ValidationError(f"cannot compare {binary_dp.label} with {tub_dp.label}")
    if binary_dp.area_unit != tub_dp.area_unit:
        raise ValidationError(f"area units differ: {binary_dp.area_unit} vs {tub_dp.area_unit}")
    ratio = binary_dp.area / tub_dp.area
    return IsoAreaThroughput(math.floor(ratio + _FLOOR_EPS), ratio)


def energy_gap(binary, tub) -> float:
    """``tub_energy / binary_energy``; accepts reports or plain pJ values."""
    b = binary.energy_pj if isinstance(binary, EnergyReport) else float(binary)
    t = tub.energy_pj if isinstance(tub, EnergyReport) else float(tub)
    if b == 0:
        raise ValidationError("binary energy is zero; gap undefined")
    return t / b


@dataclass(frozen=True)
class Projection:
    precision: Precision
    n_from: int
    n_to: int
    n_projected: int
    base_ratio: float
    binary_growth: float
    tub_growth: float
    projected_ratio: float
    label: str = "projection"


def project_iso_area_throughput(cal: Calibration, precision, n_from: int = 16,
                                n_to: int = 256) -> Projection:
    """Extrapolate single-cell iso-area throughput one squaring step past ``n_to``.

    Squaring the multiplier count from ``n_from`` to ``n_to = n_from**2``
    multiplies binary and tub cell areas by fixed growth factors. Assuming
    the next squaring step (``n_to`` to ``n_to**2``, 256 -> 65536 for the
    defaults) repeats them, the area ratio grows by
    ``binary_growth / tub_growth``.
    """
    if n_from * n_from != n_to:
        raise ValidationError(f"n_to must be n_from squared, got {n_from} -> {n_to}")
    b0, t0 = cal.pair(precision, 1, n_from)
    b1, t1 = cal.pair(precision, 1, n_to)
    binary_growth = b1.area / b0.area
    tub_growth = t1.area / t0.area
    base = b1.area / t1.area
    return Projection(
        precision=Precision.parse(precision),
        n_from=n_from,
        n_to=n_to,
        n_projected=n_to * n_to,
        base_ratio=base,
        binary_growth=binary_growth,
        tub_growth=tub_growth,
        projected_ratio=base * binary_growth / tub_growth,
    )


@dataclass
class WorkloadReport:
    precision: Precision
    k: int
    n: int
    period_ns: float
    average_cycles: float
    binary: EnergyReport
    tub: EnergyReport
    gap: float
    gap_rounded_inputs: float
    iso_area: IsoAreaThroughput
    average_silent_pes: float
    word_sparsity_percent: float
    stated_iso_area_multiple: Optional[Claim] = None
    notes: list[str] = field(default_factory=list)


def workload_report(profile: LatencyProfile, binary_dp: DesignPoint, tub_dp: DesignPoint,
                    period_ns: float = 4.0, calibration: Optional[Calibration] = None) -> WorkloadReport:
    """Compare binary and tub energy for one partial-sum set of a profiled workload.

    The binary array always takes 1 cycle; the tub array takes the profile's
    average cycles. ``gap_rounded_inputs`` rounds both energies to whole pJ
    before dividing, the way hand-reported figures usually are.
    """
    if binary_dp.precision != profile.precision or tub_dp.precision != profile.precision:
        raise ValidationError(
            f"profile precision {profile.precision.label} does not match design points "
            f"{binary_dp.label} / {tub_dp.label}"
        )
    if (tub_dp.k, tub_dp.n) != (binary_dp.k, binary_dp.n):
        raise ValidationError(f"geometry mismatch: {binary_dp.label} vs {tub_dp.label}")
    if profile.tile_k and (profile.tile_k, profile.tile_n) != (tub_dp.k, tub_dp.n):
        raise ValidationError(
            f"profile tiles are {profile.tile_k}x{profile.tile_n}, design points are {tub_dp.k}x{tub_dp.n}"
        )
    b = energy(binary_dp, 1, period_ns)
    t = energy(tub_dp, profile.average_cycles, period_ns)
    rb, rt = round(b.energy_pj), round(t.energy_pj)
    claim = None
    if calibration is not None:
        claim = calibration.claim(f"iso_area_multiple.{tub_dp.precision.label}.{tub_dp.k}x{tub_dp.n}")
    pes = tub_dp.k * tub_dp.n
    notes = [
        f"tub energy assumes all {pes} PEs are active for every cycle; with "
        f"{profile.average_silent_pes:g} silent PEs per tile on average this is an overestimate",
    ]
    if claim is not None:
        notes.append(f"stated iso-area multiple {claim.value:g} ({claim.source})")
    return WorkloadReport(
        precision=profile.precision,
        k=tub_dp.k,
        n=tub_dp.n,
        period_ns=float(period_ns),
        average_cycles=profile.average_cycles,
        binary=b,
        tub=t,
        gap=energy_gap(b, t) if b.energy_pj else math.nan,
        gap_rounded_inputs=rt / rb if rb else math.nan,
        iso_area=iso_area_throughput(binary_dp, tub_dp),
        average_silent_pes=profile.average_silent_pes,
        word_sparsity_percent=profile.word_sparsity_percent,
        stated_iso_area_multiple=claim,
        notes=notes,
    )


def _report_rows(rep: WorkloadReport) -> list[tuple[str, object, str, str]]:
    rows = [
        ("precision", rep.precision.label, "", ""),
        ("geometry", f"{rep.k}x{rep.n}", "", ""),
        ("clock_period_ns", rep.period_ns, "ns", ""),
        ("average_cycles", rep.average_cycles, "cycles", "profile"),
        ("binary_cycles", rep.binary.cycles, "cycles", ""),
        ("binary_power_mw", rep.binary.design_point.power_mw, "mW", rep.binary.design_point.source),
        ("binary_energy_pj", rep.binary.energy_pj, "pJ", ""),
        ("tub_power_mw", rep.tub.design_point.power_mw, "mW", rep.tub.design_point.source),
        ("tub_energy_pj", rep.tub.energy_pj, "pJ", ""),
        ("energy_gap", rep.gap, "x", "exact inputs"),
        ("energy_gap_rounded_inputs", rep.gap_rounded_inputs, "x", "energies rounded to whole pJ"),
        ("binary_area", rep.binary.design_point.area, rep.binary.design_point.area_unit,
         rep.binary.design_point.source),
        ("tub_area", rep.tub.design_point.area, rep.tub.design_point.area_unit, rep.tub.design_point.source),
        ("iso_area_ratio", rep.iso_area.ratio, "x", "binary area / tub area"),
        ("iso_area_multiple", rep.iso_area.multiple, "x", "whole tub arrays per binary footprint"),
    ]
    if rep.stated_iso_area_multiple is not None:
        c = rep.stated_iso_area_multiple
        rows.append(("stated_iso_area_multiple", c.value, "x", c.source))
    rows += [
        ("average_silent_pes", rep.average_silent_pes, "PEs", "profile"),
        ("word_sparsity_percent", rep.word_sparsity_percent, "%", "profile"),
    ]
    return rows


def report_to_text(rep: WorkloadReport) -> str:
    doc = {
        "report": {name: value for name, value, _, _ in _report_rows(rep)},
        "sources": {name: src for name, _, _, src in _report_rows(rep) if src},
        "notes": list(rep.notes),
    }
    # TOML has no NaN literal in tomli_w output; keep such fields as strings
    doc["report"] = {k: ("nan" if isinstance(v, float) and math.isnan(v) else v) for k, v in doc["report"].items()}
    return tomli_w.dumps(doc)


def report_to_csv(rep: WorkloadReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "value", "unit", "source"])
    for name, value, unit, src in _report_rows(rep):
        writer.writerow([name, repr(value) if isinstance(value, float) else value, unit, src])
    return buf.getvalue()
