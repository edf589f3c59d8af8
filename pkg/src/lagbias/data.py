"""Domain data: Nobel award counts and faculty gender-ratio observations.

Two delimited inputs drive everything downstream:

* ``laureates.csv`` with columns ``year,field,n_awarded,n_female``, one
  row per (field, prize year), years with no prize simply absent;
* ``ratios.csv`` with columns ``year,group,ratio`` holding the female
  share of senior faculty per discipline group as a decimal fraction.

Each prize field maps onto one discipline group for the purpose of the
lagged-ratio model: chemistry and physics to the physical sciences,
economics to the social sciences, medicine to the life sciences.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path


class Field(Enum):
    """Nobel Prize fields covered by the model, in canonical order."""

    CHEMISTRY = "chemistry"
    ECONOMICS = "economics"
    PHYSICS = "physics"
    MEDICINE = "medicine"


class RatioGroup(Enum):
    """Discipline groups of the faculty gender-ratio series."""

    PHYSICAL_SCIENCES = "physical"
    SOCIAL_SCIENCES = "social"
    LIFE_SCIENCES = "life"


FIELD_TO_GROUP = {
    Field.CHEMISTRY: RatioGroup.PHYSICAL_SCIENCES,
    Field.ECONOMICS: RatioGroup.SOCIAL_SCIENCES,
    Field.PHYSICS: RatioGroup.PHYSICAL_SCIENCES,
    Field.MEDICINE: RatioGroup.LIFE_SCIENCES,
}

LAUREATE_YEAR_RANGE = (1901, 2018)
RATIO_YEAR_RANGE = (1973, 2010)

# Aggregate counts the bundled dataset is pinned to.
EXPECTED_TOTALS = {
    Field.CHEMISTRY: (182, 5),
    Field.ECONOMICS: (81, 1),
    Field.PHYSICS: (209, 3),
    Field.MEDICINE: (216, 12),
}
EXPECTED_TOTAL_AWARDS = 688
EXPECTED_TOTAL_FEMALE = 21


class DataError(ValueError):
    """Raised when an input file fails to parse or violates an invariant."""


@dataclass(frozen=True)
class LaureateRecord:
    """Laureate counts for one prize field in one year."""

    year: int
    field: Field
    n_awarded: int
    n_female: int

    def __post_init__(self):
        lo, hi = LAUREATE_YEAR_RANGE
        if not lo <= self.year <= hi:
            raise DataError(
                f"year {self.year} outside {lo}-{hi} "
                f"({self.field.value}, {self.year})"
            )
        if self.n_awarded < 0:
            raise DataError(
                f"negative n_awarded ({self.field.value}, {self.year})"
            )
        if not 0 <= self.n_female <= self.n_awarded:
            raise DataError(
                f"n_female must lie in [0, n_awarded] "
                f"({self.field.value}, {self.year}: "
                f"{self.n_female} of {self.n_awarded})"
            )


@dataclass(frozen=True)
class RatioPoint:
    """Female share of senior faculty for one group in one survey year."""

    year: int
    group: RatioGroup
    ratio: float

    def __post_init__(self):
        lo, hi = RATIO_YEAR_RANGE
        if not lo <= self.year <= hi:
            raise DataError(
                f"year {self.year} outside {lo}-{hi} "
                f"({self.group.value}, {self.year})"
            )
        if not 0.0 < self.ratio < 1.0:
            raise DataError(
                f"ratio must lie strictly inside (0, 1) "
                f"({self.group.value}, {self.year}: {self.ratio})"
            )


@dataclass(frozen=True)
class DatasetSummary:
    """Aggregate counts over a set of laureate records."""

    awards_by_field: dict[Field, int]
    female_by_field: dict[Field, int]
    total_awards: int
    total_female: int


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"line {line}: bad {what} {text!r}") from None


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"line {line}: bad {what} {text!r}") from None


def _check_header(got: list[str] | None, want: list[str], path) -> None:
    if got is None:
        raise DataError(f"{path}: empty file")
    if [c.strip() for c in got] != want:
        raise DataError(f"{path}: expected header {','.join(want)}")


def load_laureates(path) -> list[LaureateRecord]:
    """Read laureate counts from a CSV file.

    Parameters
    ----------
    path : str or Path
        File with header ``year,field,n_awarded,n_female``.

    Returns
    -------
    list of LaureateRecord
        Sorted by field (canonical order), then year.

    Raises
    ------
    DataError
        On malformed rows, unknown fields, out-of-range years,
        ``n_female > n_awarded``, or duplicate (year, field) pairs.
    """
    records = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None),
                      ["year", "field", "n_awarded", "n_female"], path)
        for line, row in enumerate(reader, start=2):
            if not row or row == [""]:
                continue
            if len(row) != 4:
                raise DataError(f"line {line}: expected 4 columns, got {len(row)}")
            year = _parse_int(row[0], "year", line)
            try:
                field = Field(row[1].strip())
            except ValueError:
                raise DataError(f"line {line}: unknown field {row[1]!r}") from None
            n_awarded = _parse_int(row[2], "n_awarded", line)
            n_female = _parse_int(row[3], "n_female", line)
            if (year, field) in seen:
                raise DataError(
                    f"line {line}: duplicate row for ({field.value}, {year})"
                )
            seen.add((year, field))
            records.append(LaureateRecord(year, field, n_awarded, n_female))
    order = {f: i for i, f in enumerate(Field)}
    records.sort(key=lambda r: (order[r.field], r.year))
    return records


def load_ratios(path) -> list[RatioPoint]:
    """Read faculty gender-ratio observations from a CSV file.

    Parameters
    ----------
    path : str or Path
        File with header ``year,group,ratio``.

    Returns
    -------
    list of RatioPoint
        Sorted by group (canonical order), then year. Every group must
        contribute at least 4 points so a curve can be fit to it.

    Raises
    ------
    DataError
        On malformed rows, unknown groups, ratios outside (0, 1),
        duplicate (year, group) pairs, or underpopulated groups.
    """
    points = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), ["year", "group", "ratio"], path)
        for line, row in enumerate(reader, start=2):
            if not row or row == [""]:
                continue
            if len(row) != 3:
                raise DataError(f"line {line}: expected 3 columns, got {len(row)}")
            year = _parse_int(row[0], "year", line)
            try:
                group = RatioGroup(row[1].strip())
            except ValueError:
                raise DataError(f"line {line}: unknown group {row[1]!r}") from None
            ratio = _parse_float(row[2], "ratio", line)
            if (year, group) in seen:
                raise DataError(
                    f"line {line}: duplicate row for ({group.value}, {year})"
                )
            seen.add((year, group))
            points.append(RatioPoint(year, group, ratio))
    for group in RatioGroup:
        n = sum(1 for p in points if p.group is group)
        if n < 4:
            raise DataError(
                f"group {group.value!r} has {n} points, need at least 4"
            )
    order = {g: i for i, g in enumerate(RatioGroup)}
    points.sort(key=lambda p: (order[p.group], p.year))
    return points


def serialize_laureates(records: list[LaureateRecord]) -> str:
    """Canonical CSV text for laureate records.

    Rows are sorted by field (canonical order) then year, with LF line
    endings and a trailing newline, so loading and re-serialising a
    canonical file reproduces it byte for byte.
    """
    order = {f: i for i, f in enumerate(Field)}
    rows = sorted(records, key=lambda r: (order[r.field], r.year))
    lines = ["year,field,n_awarded,n_female"]
    lines += [f"{r.year},{r.field.value},{r.n_awarded},{r.n_female}" for r in rows]
    return "\n".join(lines) + "\n"


def serialize_ratios(points: list[RatioPoint]) -> str:
    """Canonical CSV text for ratio points.

    Rows are sorted by group (canonical order) then year; ratios use the
    shortest decimal form that round-trips through float.
    """
    order = {g: i for i, g in enumerate(RatioGroup)}
    rows = sorted(points, key=lambda p: (order[p.group], p.year))
    lines = ["year,group,ratio"]
    lines += [f"{p.year},{p.group.value},{p.ratio!r}" for p in rows]
    return "\n".join(lines) + "\n"


def summarize(records: list[LaureateRecord]) -> DatasetSummary:
    """Aggregate award and female counts by field and overall."""
    awards = {f: 0 for f in Field}
    female = {f: 0 for f in Field}
    for r in records:
        awards[r.field] += r.n_awarded
        female[r.field] += r.n_female
    return DatasetSummary(
        awards_by_field=awards,
        female_by_field=female,
        total_awards=sum(awards.values()),
        total_female=sum(female.values()),
    )


def check_expected_totals(summary: DatasetSummary) -> None:
    """Verify a summary against the pinned aggregates of the bundled data.

    Raises
    ------
    DataError
        Naming the first field (or the grand total) that deviates.
    """
    for field, (awards, female) in EXPECTED_TOTALS.items():
        got = (summary.awards_by_field[field], summary.female_by_field[field])
        if got != (awards, female):
            raise DataError(
                f"{field.value}: expected {awards} awards / {female} female, "
                f"got {got[0]} / {got[1]}"
            )
    if summary.total_awards != EXPECTED_TOTAL_AWARDS:
        raise DataError(
            f"expected {EXPECTED_TOTAL_AWARDS} awards in total, "
            f"got {summary.total_awards}"
        )
    if summary.total_female != EXPECTED_TOTAL_FEMALE:
        raise DataError(
            f"expected {EXPECTED_TOTAL_FEMALE} female laureates in total, "
            f"got {summary.total_female}"
        )


def bundled_laureates_path() -> Path:
    """Path of the laureate table shipped with the package."""
    return Path(resources.files("lagbias.datasets") / "laureates.csv")


def bundled_ratios_path() -> Path:
    """Path of the gender-ratio table shipped with the package."""
    return Path(resources.files("lagbias.datasets") / "ratios.csv")


def file_sha256(path) -> str:
    """Hex SHA-256 of a file, for pinning inputs in run metadata."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
