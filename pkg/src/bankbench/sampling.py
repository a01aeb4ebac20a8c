"""Firm-year instance construction and temporal splits.

An instance asks: as of the date a company's report for a considered year
was (or would have been) filed, does the company go bankrupt within one
year?  The prediction window therefore starts at the filing date of the
considered year's report.  When that report is absent, the window is
imputed by transposing the month and day of the latest available earlier
filing into the considered year, so companies that fell silent stay in
the population.

Leakage rules, all enforced here:

- history slots only ever contain reports filed on or before the window
  start (the newest slot is the window-start filing itself);
- a company already bankrupt before the window starts yields no instance;
- a company yields at most one positive instance, after which it leaves
  the population;
- training anchors never exceed Dec 31 of the cutoff year, while labels
  may mature during the following year.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
from typing import Iterable, Sequence

import numpy as np

from .corpus import Company
from .textprep import MISSING_TOKEN

__all__ = [
    "FirmYearInstance",
    "SplitSpec",
    "add_one_year",
    "transpose_into_year",
    "determine_window",
    "build_instance",
    "instances_for_company",
    "build_training_set",
    "build_eval_set",
    "undersample",
    "write_instances",
    "load_instances",
]


def _clamp_feb29(year: int, month: int, day: int) -> dt.date:
    if month == 2 and day == 29:
        day = 28
    return dt.date(year, month, day)


def add_one_year(date: dt.date) -> dt.date:
    """Same month and day one year later; Feb 29 maps to Feb 28."""
    return _clamp_feb29(date.year + 1, date.month, date.day)


def transpose_into_year(date: dt.date, year: int) -> dt.date:
    """Same month and day in the given year; Feb 29 maps to Feb 28."""
    return _clamp_feb29(year, date.month, date.day)


@dataclasses.dataclass(frozen=True)
class FirmYearInstance:
    """One company observed at one considered year.

    ``history_texts`` holds the narratives of the H most recent report
    years up to and including the considered year, oldest first, with the
    ``missing`` sentinel for years without a report.  The label is 1 when
    the company files for bankruptcy inside [window_start, window_end).
    """

    company_id: str
    considered_year: int
    window_start: dt.date
    window_end: dt.date
    label: int
    history_texts: tuple[str, ...]
    imputed: bool

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if len(self.history_texts) not in (1, 3):
            raise ValueError("history length must be 1 or 3")
        if self.window_end != add_one_year(self.window_start):
            raise ValueError("window must span exactly one year")

    @property
    def history_len(self) -> int:
        return len(self.history_texts)

    @property
    def all_missing(self) -> bool:
        return all(t == MISSING_TOKEN for t in self.history_texts)

    def doc_key(self, slot: int) -> str:
        """Stable external key for one history slot: ``cik:year:slot``."""
        return f"{self.company_id}:{self.considered_year}:{slot}"


@dataclasses.dataclass(frozen=True)
class SplitSpec:
    """Temporal split definition shared by training and evaluation."""

    train_cutoff_year: int
    validation_years: tuple[int, ...]
    test_years: tuple[int, ...]
    history_len: int = 1
    all_missing_keep_rate: float = 0.05
    eval_activity_window: int = 5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.history_len not in (1, 3):
            raise ValueError("history_len must be 1 or 3")
        if not 0.0 <= self.all_missing_keep_rate <= 1.0:
            raise ValueError("all_missing_keep_rate must be in [0, 1]")
        if self.eval_activity_window < 1:
            raise ValueError("eval_activity_window must be at least 1")
        if not self.validation_years and not self.test_years:
            raise ValueError("at least one evaluation year is required")
        for year in self.validation_years + self.test_years:
            if year <= self.train_cutoff_year + 1:
                raise ValueError(
                    f"evaluation year {year} overlaps training labels "
                    f"(cutoff {self.train_cutoff_year} consumes bankruptcies "
                    f"through {self.train_cutoff_year + 1})"
                )

    def to_dict(self) -> dict:
        return {
            "train_cutoff_year": self.train_cutoff_year,
            "validation_years": list(self.validation_years),
            "test_years": list(self.test_years),
            "history_len": self.history_len,
            "all_missing_keep_rate": self.all_missing_keep_rate,
            "eval_activity_window": self.eval_activity_window,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SplitSpec":
        return cls(
            train_cutoff_year=int(payload["train_cutoff_year"]),
            validation_years=tuple(payload.get("validation_years", ())),
            test_years=tuple(payload.get("test_years", ())),
            history_len=int(payload.get("history_len", 1)),
            all_missing_keep_rate=float(payload.get("all_missing_keep_rate", 0.05)),
            eval_activity_window=int(payload.get("eval_activity_window", 5)),
            rng_seed=int(payload.get("rng_seed", 0)),
        )


def determine_window(company: Company, year: int) -> tuple[dt.date, bool] | None:
    """Window start for a considered year, and whether it was imputed.

    The start is the filing date of the report filed in that calendar
    year; absent one, the month/day of the latest earlier filing
    transposed into the year.  ``None`` when the company has no filing
    history by the end of the year.
    """
    anchor = company.report_in_year(year)
    if anchor is not None:
        return anchor.filing_date, False
    latest = company.latest_report_filed_by(dt.date(year, 12, 31))
    if latest is None:
        return None
    return transpose_into_year(latest.filing_date, year), True


def build_instance(company: Company, year: int, history_len: int) -> FirmYearInstance | None:
    """One firm-year instance, or ``None`` when no window exists or the
    company was already bankrupt before the window started."""
    window = determine_window(company, year)
    if window is None:
        return None
    window_start, imputed = window
    bankruptcy = company.bankruptcy
    if bankruptcy is not None and bankruptcy.filing_date < window_start:
        return None
    window_end = add_one_year(window_start)
    label = int(
        bankruptcy is not None and window_start <= bankruptcy.filing_date < window_end
    )
    slots = []
    for slot_year in range(year - history_len + 1, year + 1):
        report = company.report_in_year(slot_year)
        if report is None:
            slots.append(MISSING_TOKEN)
        else:
            assert report.filing_date <= window_start, "history would peek past anchor"
            slots.append(report.mdna_text)
    return FirmYearInstance(
        company_id=company.company_id,
        considered_year=year,
        window_start=window_start,
        window_end=window_end,
        label=label,
        history_texts=tuple(slots),
        imputed=imputed,
    )


def instances_for_company(
    company: Company, years: Sequence[int], history_len: int
) -> list[FirmYearInstance]:
    """Instances over consecutive considered years, stopping at the first
    positive: a failed company leaves the population."""
    out = []
    for year in years:
        instance = build_instance(company, year, history_len)
        if instance is None:
            continue
        out.append(instance)
        if instance.label == 1:
            break
    return out


def build_training_set(
    companies: Iterable[Company], spec: SplitSpec
) -> list[FirmYearInstance]:
    """All firm-year instances from each company's first report year
    through the cutoff year, with all-missing instances subsampled.

    Instances whose history slots are all the ``missing`` sentinel carry
    no text signal and dominate the population; a seeded subsample keeps
    ``all_missing_keep_rate`` of them.  Output is ordered by company and
    year.
    """
    instances: list[FirmYearInstance] = []
    for company in sorted(companies, key=lambda c: c.company_id):
        first = company.first_report_year()
        if first is None or first > spec.train_cutoff_year:
            continue
        years = range(first, spec.train_cutoff_year + 1)
        instances.extend(instances_for_company(company, years, spec.history_len))
    if not instances:
        raise ValueError(
            f"no training instances at cutoff {spec.train_cutoff_year}; "
            "is the cutoff inside the corpus date range?"
        )
    all_missing_idx = [i for i, inst in enumerate(instances) if inst.all_missing]
    n_keep = int(round(len(all_missing_idx) * spec.all_missing_keep_rate))
    if n_keep < len(all_missing_idx):
        rng = np.random.default_rng(spec.rng_seed)
        chosen = rng.choice(len(all_missing_idx), size=n_keep, replace=False)
        keep = {all_missing_idx[i] for i in chosen}
        instances = [
            inst
            for i, inst in enumerate(instances)
            if not inst.all_missing or i in keep
        ]
    return instances


def build_eval_set(
    companies: Iterable[Company], year: int, spec: SplitSpec
) -> list[FirmYearInstance]:
    """The evaluation population for one year: every company with a filing
    in the last ``eval_activity_window`` years and a valid window, one
    instance each, never subsampled."""
    if year not in spec.validation_years and year not in spec.test_years:
        raise ValueError(f"{year} is not an evaluation year of this split")
    out = []
    for company in sorted(companies, key=lambda c: c.company_id):
        active = any(
            year - spec.eval_activity_window + 1 <= r.filing_date.year <= year
            for r in company.reports
        )
        if not active:
            continue
        instance = build_instance(company, year, spec.history_len)
        if instance is not None:
            out.append(instance)
    return out


def undersample(
    instances: Sequence[FirmYearInstance],
    target_majority_frac: float = 0.90,
    rng_seed: int = 0,
) -> list[FirmYearInstance]:
    """Subsample negatives to ``target_majority_frac`` of the result,
    keeping every positive and the original ordering."""
    if not 0.0 < target_majority_frac < 1.0:
        raise ValueError("target_majority_frac must be in (0, 1)")
    positives = [i for i, inst in enumerate(instances) if inst.label == 1]
    negatives = [i for i, inst in enumerate(instances) if inst.label == 0]
    if not positives:
        raise ValueError("cannot undersample a set with no positives")
    ratio = target_majority_frac / (1.0 - target_majority_frac)
    n_neg = min(len(negatives), int(round(len(positives) * ratio)))
    keep = set(positives)
    if n_neg < len(negatives):
        rng = np.random.default_rng(rng_seed)
        chosen = rng.choice(len(negatives), size=n_neg, replace=False)
        keep.update(negatives[i] for i in chosen)
    else:
        keep.update(negatives)
    return [inst for i, inst in enumerate(instances) if i in keep]


def write_instances(instances: Iterable[FirmYearInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(
                json.dumps(
                    {
                        "cik": inst.company_id,
                        "year": inst.considered_year,
                        "window_start": inst.window_start.isoformat(),
                        "window_end": inst.window_end.isoformat(),
                        "label": inst.label,
                        "history": list(inst.history_texts),
                        "imputed": inst.imputed,
                    }
                )
                + "\n"
            )


def load_instances(path) -> list[FirmYearInstance]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    FirmYearInstance(
                        company_id=str(rec["cik"]),
                        considered_year=int(rec["year"]),
                        window_start=dt.date.fromisoformat(rec["window_start"]),
                        window_end=dt.date.fromisoformat(rec["window_end"]),
                        label=int(rec["label"]),
                        history_texts=tuple(rec["history"]),
                        imputed=bool(rec["imputed"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
    return out
