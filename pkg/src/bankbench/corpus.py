"""Raw corpus model: report narratives joined with bankruptcy filings.

A corpus is a set of companies; each company carries its yearly report
narratives (one per calendar year of filing) and at most one bankruptcy
filing.  Two JSONL files feed the loader:

- ``reports.jsonl``:      {"cik", "period_of_report", "filing_date", "mdna"}
- ``bankruptcies.jsonl``: {"cik", "filing_date", "chapter"} with chapter 7 or 11

Malformed lines are hard errors (with line numbers); records that are
well-formed but inconsistent — a report filed before its period ended, a
second report in the same calendar year, a report filed on or after the
company's bankruptcy — are dropped with a warning count, because real
filing data contains all three.

The module also ships a synthetic corpus generator used for calibrated
end-to-end testing: background text follows a Zipf-Mandelbrot unigram
distribution over pseudo-words, bankruptcies arrive via a per-firm-year
hazard, reporting gaps follow three mechanisms (permanent stop, random
gap, pre-bankruptcy silence), and soon-to-fail companies receive sentences
drawn from a configurable distress lexicon.
"""

from __future__ import annotations

import calendar
import dataclasses
import datetime as dt
import json
import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .textprep import MISSING_TOKEN, UNK_TOKEN, preprocess

logger = logging.getLogger(__name__)

__all__ = [
    "Report",
    "BankruptcyFiling",
    "Company",
    "CorpusError",
    "CorpusLoad",
    "load_corpus",
    "write_corpus",
    "load_corpus_dir",
    "write_corpus_dir",
    "REPORTS_FILENAME",
    "BANKRUPTCIES_FILENAME",
    "MissingMechanisms",
    "SyntheticConfig",
    "GenerationTrace",
    "generate_synthetic",
    "generate_synthetic_with_trace",
    "CorpusStats",
    "corpus_stats",
    "format_stats",
]


class CorpusError(ValueError):
    """Unrecoverable problem in corpus input data."""


@dataclasses.dataclass(frozen=True)
class Report:
    """One annual report narrative."""

    company_id: str
    period_end: dt.date
    filing_date: dt.date
    mdna_text: str

    def __post_init__(self) -> None:
        if self.filing_date < self.period_end:
            raise ValueError(
                f"{self.company_id}: filed {self.filing_date} before period end {self.period_end}"
            )


@dataclasses.dataclass(frozen=True)
class BankruptcyFiling:
    company_id: str
    filing_date: dt.date
    chapter: int

    def __post_init__(self) -> None:
        if self.chapter not in (7, 11):
            raise ValueError(f"{self.company_id}: chapter must be 7 or 11, got {self.chapter}")


@dataclasses.dataclass(frozen=True)
class Company:
    """All reports for one company, oldest first, plus an optional filing.

    Invariants enforced here: reports sorted by filing date, at most one
    report per calendar year, and every report filed strictly before the
    bankruptcy filing (if any).
    """

    company_id: str
    reports: tuple[Report, ...]
    bankruptcy: BankruptcyFiling | None = None

    def __post_init__(self) -> None:
        years = set()
        previous = None
        for report in self.reports:
            if report.company_id != self.company_id:
                raise ValueError(f"report for {report.company_id} attached to {self.company_id}")
            if previous is not None and report.filing_date <= previous:
                raise ValueError(f"{self.company_id}: reports not strictly ordered by filing date")
            previous = report.filing_date
            year = report.filing_date.year
            if year in years:
                raise ValueError(f"{self.company_id}: two reports filed in {year}")
            years.add(year)
        if self.bankruptcy is not None:
            if self.bankruptcy.company_id != self.company_id:
                raise ValueError(f"{self.company_id}: bankruptcy filing belongs to another company")
            for report in self.reports:
                if report.filing_date >= self.bankruptcy.filing_date:
                    raise ValueError(
                        f"{self.company_id}: report filed {report.filing_date} on/after bankruptcy"
                    )

    def report_in_year(self, year: int) -> Report | None:
        for report in self.reports:
            if report.filing_date.year == year:
                return report
        return None

    def latest_report_filed_by(self, date: dt.date) -> Report | None:
        latest = None
        for report in self.reports:
            if report.filing_date <= date:
                latest = report
            else:
                break
        return latest

    def first_report_year(self) -> int | None:
        return self.reports[0].filing_date.year if self.reports else None


@dataclasses.dataclass
class CorpusLoad:
    """Loader result: companies plus counts of records dropped with warnings."""

    companies: list[Company]
    rejected_date_order: int = 0
    duplicate_year_reports: int = 0
    dropped_post_bankruptcy: int = 0
    extra_bankruptcy_filings: int = 0

    def __iter__(self):
        return iter(self.companies)

    def __len__(self) -> int:
        return len(self.companies)

    @property
    def total_warnings(self) -> int:
        return (
            self.rejected_date_order
            + self.duplicate_year_reports
            + self.dropped_post_bankruptcy
            + self.extra_bankruptcy_filings
        )


def _parse_date(value, path, lineno) -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"{path}: line {lineno}: bad date {value!r}") from exc


def _parse_jsonl(path) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: malformed JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}: line {lineno}: expected an object")
            yield lineno, record


def _require(record: dict, keys: Sequence[str], path, lineno) -> None:
    for key in keys:
        if key not in record:
            raise CorpusError(f"{path}: line {lineno}: missing key {key!r}")


def load_corpus(reports_path, bankruptcies_path) -> CorpusLoad:
    """Read both JSONL files and join them into per-company records.

    Hard errors (``CorpusError`` with a line number): malformed lines,
    missing keys, unparseable dates, an invalid chapter, or two reports
    sharing a (cik, filing_date) key.  Recoverable inconsistencies are
    dropped and counted on the returned ``CorpusLoad``.
    """
    result = CorpusLoad(companies=[])
    reports: dict[str, dict[int, Report]] = {}
    seen_filings: set[tuple[str, dt.date]] = set()

    for lineno, record in _parse_jsonl(reports_path):
        _require(record, ("cik", "period_of_report", "filing_date", "mdna"), reports_path, lineno)
        cik = str(record["cik"])
        period_end = _parse_date(record["period_of_report"], reports_path, lineno)
        filing_date = _parse_date(record["filing_date"], reports_path, lineno)
        if not isinstance(record["mdna"], str):
            raise CorpusError(f"{reports_path}: line {lineno}: mdna must be a string")
        key = (cik, filing_date)
        if key in seen_filings:
            raise CorpusError(
                f"{reports_path}: line {lineno}: duplicate report for {cik} filed {filing_date}"
            )
        seen_filings.add(key)
        if filing_date < period_end:
            logger.warning(
                "%s line %d: report for %s filed %s before period end %s; rejected",
                reports_path, lineno, cik, filing_date, period_end,
            )
            result.rejected_date_order += 1
            continue
        year_reports = reports.setdefault(cik, {})
        year = filing_date.year
        existing = year_reports.get(year)
        report = Report(cik, period_end, filing_date, record["mdna"])
        if existing is None:
            year_reports[year] = report
        else:
            # amendments: keep the earliest filing of the calendar year
            if report.filing_date < existing.filing_date:
                year_reports[year] = report
            logger.warning(
                "%s line %d: second report for %s in %d; keeping earliest",
                reports_path, lineno, cik, year,
            )
            result.duplicate_year_reports += 1

    filings: dict[str, BankruptcyFiling] = {}
    for lineno, record in _parse_jsonl(bankruptcies_path):
        _require(record, ("cik", "filing_date", "chapter"), bankruptcies_path, lineno)
        cik = str(record["cik"])
        filing_date = _parse_date(record["filing_date"], bankruptcies_path, lineno)
        chapter = record["chapter"]
        if chapter not in (7, 11):
            raise CorpusError(
                f"{bankruptcies_path}: line {lineno}: chapter must be 7 or 11, got {chapter!r}"
            )
        filing = BankruptcyFiling(cik, filing_date, chapter)
        existing = filings.get(cik)
        if existing is None:
            filings[cik] = filing
        else:
            if filing.filing_date < existing.filing_date:
                filings[cik] = filing
            logger.warning(
                "%s line %d: extra bankruptcy filing for %s; keeping earliest",
                bankruptcies_path, lineno, cik,
            )
            result.extra_bankruptcy_filings += 1

    for cik in sorted(set(reports) | set(filings)):
        filing = filings.get(cik)
        kept = []
        for year in sorted(reports.get(cik, {})):
            report = reports[cik][year]
            if filing is not None and report.filing_date >= filing.filing_date:
                logger.warning(
                    "%s: report filed %s on/after bankruptcy %s; dropped",
                    cik, report.filing_date, filing.filing_date,
                )
                result.dropped_post_bankruptcy += 1
                continue
            kept.append(report)
        result.companies.append(Company(cik, tuple(kept), filing))
    return result


def write_corpus(companies: Iterable[Company], reports_path, bankruptcies_path) -> None:
    """Inverse of ``load_corpus`` for clean corpora, deterministic output."""
    companies = sorted(companies, key=lambda c: c.company_id)
    with open(reports_path, "w", encoding="utf-8") as fh:
        for company in companies:
            for report in company.reports:
                fh.write(
                    json.dumps(
                        {
                            "cik": company.company_id,
                            "period_of_report": report.period_end.isoformat(),
                            "filing_date": report.filing_date.isoformat(),
                            "mdna": report.mdna_text,
                        }
                    )
                    + "\n"
                )
    with open(bankruptcies_path, "w", encoding="utf-8") as fh:
        for company in companies:
            if company.bankruptcy is None:
                continue
            fh.write(
                json.dumps(
                    {
                        "cik": company.company_id,
                        "filing_date": company.bankruptcy.filing_date.isoformat(),
                        "chapter": company.bankruptcy.chapter,
                    }
                )
                + "\n"
            )


REPORTS_FILENAME = "reports.jsonl"
BANKRUPTCIES_FILENAME = "bankruptcies.jsonl"


def load_corpus_dir(dir_path) -> CorpusLoad:
    """Load a corpus directory holding the two standard JSONL files."""
    d = Path(dir_path)
    return load_corpus(d / REPORTS_FILENAME, d / BANKRUPTCIES_FILENAME)


def write_corpus_dir(companies: Iterable[Company], dir_path) -> None:
    """Write a corpus directory holding the two standard JSONL files."""
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    write_corpus(companies, d / REPORTS_FILENAME, d / BANKRUPTCIES_FILENAME)


# --------------------------------------------------------------------------
# synthetic corpus generation
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class MissingMechanisms:
    """Probabilities for the three reporting-gap mechanisms."""

    permanent_stop: float = 0.04  # per healthy company: stops filing forever
    random_gap: float = 0.04  # per report-year: isolated skipped filing
    pre_bankruptcy_silence: float = 0.15  # per bankrupt company: final 1-2 filings absent

    def validate(self) -> list[str]:
        problems = []
        for name in ("permanent_stop", "random_gap", "pre_bankruptcy_silence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"missing_mechanisms.{name} must be in [0, 1], got {value}")
        return problems


@dataclasses.dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the synthetic corpus generator.

    ``distress_lexicon`` tokens must survive preprocessing unchanged and
    must not collide with the background lexicon (the generator excludes
    them from it).
    """

    n_companies: int
    year_range: tuple[int, int]
    base_bankruptcy_rate: float
    distress_lexicon: tuple[str, ...]
    distress_injection_rate: float
    missing_mechanisms: MissingMechanisms = MissingMechanisms()
    doc_length_mean: float = 400.0
    doc_length_std: float = 80.0
    rng_seed: int = 0
    background_vocab_size: int = 30_000

    def validate(self) -> None:
        problems = []
        if self.n_companies <= 0:
            problems.append(f"n_companies must be positive, got {self.n_companies}")
        y0, y1 = self.year_range
        if y1 - y0 + 1 < 6:
            problems.append(f"year_range must span at least 6 years, got {self.year_range}")
        if not 0.0 <= self.base_bankruptcy_rate <= 1.0:
            problems.append("base_bankruptcy_rate must be in [0, 1]")
        if not self.distress_lexicon:
            problems.append("distress_lexicon must not be empty")
        if len(set(self.distress_lexicon)) != len(self.distress_lexicon):
            problems.append("distress_lexicon contains duplicates")
        if not 0.0 <= self.distress_injection_rate <= 1.0:
            problems.append("distress_injection_rate must be in [0, 1]")
        if self.doc_length_mean <= 0 or self.doc_length_std < 0:
            problems.append("document length parameters must be positive")
        if self.background_vocab_size < 100:
            problems.append("background_vocab_size must be at least 100")
        problems.extend(self.missing_mechanisms.validate())
        for token in self.distress_lexicon:
            if preprocess(token) != [token]:
                problems.append(f"distress token {token!r} does not survive preprocessing")
        if problems:
            raise ValueError("invalid synthetic config: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return {
            "n_companies": self.n_companies,
            "year_range": list(self.year_range),
            "base_bankruptcy_rate": self.base_bankruptcy_rate,
            "distress_lexicon": list(self.distress_lexicon),
            "distress_injection_rate": self.distress_injection_rate,
            "missing_mechanisms": dataclasses.asdict(self.missing_mechanisms),
            "doc_length_mean": self.doc_length_mean,
            "doc_length_std": self.doc_length_std,
            "rng_seed": self.rng_seed,
            "background_vocab_size": self.background_vocab_size,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SyntheticConfig":
        mechanisms = MissingMechanisms(**payload.get("missing_mechanisms", {}))
        return cls(
            n_companies=int(payload["n_companies"]),
            year_range=tuple(payload["year_range"]),
            base_bankruptcy_rate=float(payload["base_bankruptcy_rate"]),
            distress_lexicon=tuple(payload["distress_lexicon"]),
            distress_injection_rate=float(payload["distress_injection_rate"]),
            missing_mechanisms=mechanisms,
            doc_length_mean=float(payload.get("doc_length_mean", 400.0)),
            doc_length_std=float(payload.get("doc_length_std", 80.0)),
            rng_seed=int(payload.get("rng_seed", 0)),
            background_vocab_size=int(payload.get("background_vocab_size", 30_000)),
        )


@dataclasses.dataclass
class GenerationTrace:
    """Realized counts from one generator run, for calibration checks."""

    at_risk_firm_years: int = 0
    bankruptcies: int = 0
    permanent_stops: int = 0
    healthy_companies: int = 0
    gap_years: int = 0
    gap_candidate_years: int = 0
    silenced_companies: int = 0
    injected_heavy: int = 0
    injected_light: int = 0
    reports_written: int = 0


_ONSETS = [
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t",
    "v", "w", "br", "cr", "dr", "fr", "gr", "pr", "tr", "bl", "cl", "fl",
    "gl", "pl", "sl", "st", "sp", "sc", "sk", "sm", "sn", "qu", "th", "sh",
    "ch", "wh",
]
_NUCLEI = ["a", "e", "i", "o", "u", "ai", "ea", "ee", "oa", "oo", "ou"]
# codas avoid s/d/g endings so pseudo-words are stable under lemmatisation
_CODAS = ["", "n", "r", "l", "t", "k", "m", "nt", "nd", "rn", "rm", "lt"]


def _build_background_lexicon(size: int, exclude: set[str], rng: np.random.Generator) -> list[str]:
    words: list[str] = []
    seen = set(exclude) | {MISSING_TOKEN, UNK_TOKEN}
    while len(words) < size:
        syllables = 1 + int(rng.random() < 0.75) + int(rng.random() < 0.3)
        parts = []
        for _ in range(syllables):
            parts.append(_ONSETS[int(rng.integers(len(_ONSETS)))])
            parts.append(_NUCLEI[int(rng.integers(len(_NUCLEI)))])
        parts.append(_CODAS[int(rng.integers(len(_CODAS)))])
        word = "".join(parts)
        if len(word) < 2 or word in seen:
            continue
        # only words the text pipeline passes through unchanged
        if preprocess(word) != [word]:
            continue
        seen.add(word)
        words.append(word)
    return words


def _zipf_cdf(size: int) -> np.ndarray:
    ranks = np.arange(1, size + 1, dtype=np.float64)
    weights = (ranks + 2.7) ** -1.07
    return np.cumsum(weights / weights.sum())


def _month_end(year: int, month: int) -> dt.date:
    return dt.date(year, month, calendar.monthrange(year, month)[1])


class _TextSampler:
    """Draws sentence token streams from the Zipf background distribution."""

    def __init__(self, lexicon: list[str], rng: np.random.Generator) -> None:
        self.lexicon = lexicon
        self.cdf = _zipf_cdf(len(lexicon))
        self.rng = rng

    def background_tokens(self, n: int) -> list[str]:
        ids = np.searchsorted(self.cdf, self.rng.random(n), side="right")
        ids = np.minimum(ids, len(self.lexicon) - 1)
        return [self.lexicon[i] for i in ids]

    def sentences(self, n_tokens: int) -> list[list[str]]:
        tokens = self.background_tokens(n_tokens)
        sentences = []
        i = 0
        while i < len(tokens):
            length = int(self.rng.integers(8, 16))
            sentences.append(tokens[i : i + length])
            i += length
        return sentences

    def distress_sentence(self, lexicon: Sequence[str]) -> list[str]:
        length = int(self.rng.integers(8, 13))
        out = []
        for _ in range(length):
            if self.rng.random() < 0.7:
                out.append(lexicon[int(self.rng.integers(len(lexicon)))])
            else:
                out.append(self.background_tokens(1)[0])
        return out


def _render(sentences: list[list[str]]) -> str:
    rendered = []
    for sentence in sentences:
        if not sentence:
            continue
        text = " ".join(sentence)
        rendered.append(text[0].upper() + text[1:])
    return ". ".join(rendered) + "."


def generate_synthetic_with_trace(
    config: SyntheticConfig,
) -> tuple[list[Company], GenerationTrace]:
    """Deterministic synthetic corpus plus realized-mechanism counters."""
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    trace = GenerationTrace()
    y0, y1 = config.year_range
    lexicon = _build_background_lexicon(
        config.background_vocab_size, set(config.distress_lexicon), rng
    )
    sampler = _TextSampler(lexicon, rng)
    mech = config.missing_mechanisms

    companies: list[Company] = []
    for index in range(config.n_companies):
        cik = f"{index + 1:07d}"
        entry_year = y0 if rng.random() < 0.55 else int(rng.integers(y0, y1 + 1))
        fiscal_month = 12 if rng.random() < 0.7 else int(rng.integers(1, 7))
        base_lag = int(np.clip(round(rng.normal(75.0, 12.0)), 50, 110))

        # per-firm-year bankruptcy hazard, active from the second year
        bankruptcy_year = None
        for year in range(entry_year + 1, y1 + 1):
            trace.at_risk_firm_years += 1
            if rng.random() < config.base_bankruptcy_rate:
                bankruptcy_year = year
                break

        def anchor(year: int) -> tuple[dt.date, dt.date]:
            period = _month_end(year - 1, 12) if fiscal_month == 12 else _month_end(year, fiscal_month)
            jitter = int(rng.integers(-7, 8))
            return period, period + dt.timedelta(days=base_lag + jitter)

        last_report_year = y1
        filing: BankruptcyFiling | None = None
        if bankruptcy_year is not None:
            trace.bankruptcies += 1
            last_report_year = bankruptcy_year
        else:
            trace.healthy_companies += 1
            if rng.random() < mech.permanent_stop and entry_year < y1:
                trace.permanent_stops += 1
                last_report_year = int(rng.integers(entry_year, y1))

        planned: list[tuple[int, dt.date, dt.date]] = []
        for year in range(entry_year, last_report_year + 1):
            period, filed = anchor(year)
            if year > entry_year:
                trace.gap_candidate_years += 1
                if rng.random() < mech.random_gap:
                    trace.gap_years += 1
                    continue
            planned.append((year, period, filed))

        if bankruptcy_year is not None:
            _, final_filed = anchor(bankruptcy_year)
            bk_date = final_filed + dt.timedelta(days=int(rng.integers(40, 320)))
            chapter = 11 if rng.random() < 0.8 else 7
            filing = BankruptcyFiling(cik, bk_date, chapter)
            if planned and rng.random() < mech.pre_bankruptcy_silence:
                trace.silenced_companies += 1
                silence = 1 + int(rng.random() < 0.5)
                cut = {y for y in range(bankruptcy_year - silence + 1, bankruptcy_year + 1)}
                planned = [p for p in planned if p[0] not in cut]

        docs: list[tuple[int, dt.date, dt.date, list[list[str]]]] = []
        for year, period, filed in planned:
            n_tokens = max(30, int(round(rng.normal(config.doc_length_mean, config.doc_length_std))))
            docs.append((year, period, filed, sampler.sentences(n_tokens)))

        if filing is not None and docs:
            # distress language enters the final one or two surviving reports
            if rng.random() < config.distress_injection_rate:
                trace.injected_heavy += 1
                sentences = docs[-1][3]
                for _ in range(10):
                    pos = int(rng.integers(len(sentences) + 1))
                    sentences.insert(pos, sampler.distress_sentence(config.distress_lexicon))
            if len(docs) >= 2 and rng.random() < config.distress_injection_rate * 0.5:
                trace.injected_light += 1
                sentences = docs[-2][3]
                for _ in range(3):
                    pos = int(rng.integers(len(sentences) + 1))
                    sentences.insert(pos, sampler.distress_sentence(config.distress_lexicon))

        reports = tuple(
            Report(cik, period, filed, _render(sentences))
            for _, period, filed, sentences in docs
        )
        trace.reports_written += len(reports)
        companies.append(Company(cik, reports, filing))
    return companies, trace


def generate_synthetic(config: SyntheticConfig) -> list[Company]:
    """Deterministic synthetic corpus; same seed, same bytes."""
    companies, _ = generate_synthetic_with_trace(config)
    return companies


# --------------------------------------------------------------------------
# corpus statistics
# --------------------------------------------------------------------------


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


@dataclasses.dataclass
class CorpusStats:
    """Per-year activity counts and document length summary."""

    n_companies: int
    n_reports: int
    n_bankruptcies: int
    reports_per_year: dict[int, int]
    bankruptcies_per_year: dict[int, int]
    new_companies_per_year: dict[int, int]
    doc_length_mean: float
    doc_length_std: float

    def yearly_summary(self) -> dict[str, tuple[float, float]]:
        years = sorted(self.reports_per_year)
        return {
            "reports_per_year": _mean_std([self.reports_per_year[y] for y in years]),
            "bankruptcies_per_year": _mean_std(
                [self.bankruptcies_per_year.get(y, 0) for y in years]
            ),
            "new_companies_per_year": _mean_std(
                [self.new_companies_per_year.get(y, 0) for y in years]
            ),
        }


def corpus_stats(companies: Iterable[Company]) -> CorpusStats:
    """Activity and document-length statistics over a loaded corpus.

    Document length counts whitespace-delimited tokens of the raw
    narrative.  Standard deviations are sample standard deviations, with
    the single-observation case defined as zero.
    """
    reports_per_year: dict[int, int] = {}
    bankruptcies_per_year: dict[int, int] = {}
    new_per_year: dict[int, int] = {}
    lengths: list[int] = []
    n_companies = 0
    n_bankruptcies = 0
    for company in companies:
        n_companies += 1
        first = company.first_report_year()
        if first is not None:
            new_per_year[first] = new_per_year.get(first, 0) + 1
        for report in company.reports:
            year = report.filing_date.year
            reports_per_year[year] = reports_per_year.get(year, 0) + 1
            lengths.append(len(report.mdna_text.split()))
        if company.bankruptcy is not None:
            n_bankruptcies += 1
            year = company.bankruptcy.filing_date.year
            bankruptcies_per_year[year] = bankruptcies_per_year.get(year, 0) + 1
    mean, std = _mean_std(lengths)
    return CorpusStats(
        n_companies=n_companies,
        n_reports=len(lengths),
        n_bankruptcies=n_bankruptcies,
        reports_per_year=reports_per_year,
        bankruptcies_per_year=bankruptcies_per_year,
        new_companies_per_year=new_per_year,
        doc_length_mean=mean,
        doc_length_std=std,
    )


def format_stats(stats: CorpusStats) -> str:
    """Year-by-year table plus aggregate lines, for terminal display."""
    lines = [
        f"companies: {stats.n_companies}   reports: {stats.n_reports}   "
        f"bankruptcies: {stats.n_bankruptcies}",
        f"document length (tokens): {stats.doc_length_mean:.1f} "
        f"+/- {stats.doc_length_std:.1f}",
        "",
        f"{'year':>6} {'reports':>8} {'bankruptcies':>13} {'new companies':>14}",
    ]
    for year in sorted(stats.reports_per_year):
        lines.append(
            f"{year:>6} {stats.reports_per_year[year]:>8} "
            f"{stats.bankruptcies_per_year.get(year, 0):>13} "
            f"{stats.new_companies_per_year.get(year, 0):>14}"
        )
    summary = stats.yearly_summary()
    lines.append("")
    for name, (mean, std) in summary.items():
        lines.append(f"{name}: {mean:.1f} +/- {std:.1f}")
    return "\n".join(lines)
