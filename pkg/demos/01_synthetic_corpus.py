"""Synthetic corpus generation and loading
==========================================

Every capability of the toolkit can be exercised without real filings:
a seeded generator produces companies with yearly narrative reports, a
planted distress vocabulary that intensifies before failures, and the
three missingness mechanisms seen in practice (permanent delisting,
random reporting gaps, and silence in the years before a bankruptcy).

This script
1. configures and runs the generator,
2. prints the corpus activity profile,
3. round-trips the corpus through the JSONL loader, and
4. shows the loader's hygiene counters on a corrupted file.
"""

import json
import tempfile
from pathlib import Path

from bankbench.corpus import (
    MissingMechanisms,
    SyntheticConfig,
    corpus_stats,
    generate_synthetic,
    load_corpus_dir,
    write_corpus_dir,
)

OUT = Path(tempfile.gettempdir()) / "bankbench_demos" / "01_synthetic_corpus"
OUT.mkdir(parents=True, exist_ok=True)

# ----------------------------------------------------------------------
# 1. Configure the generator
# ----------------------------------------------------------------------
# The distress lexicon is the planted signal: these words are injected
# into the final pre-bankruptcy narratives, heavily into the last one
# and lightly into the one before it.
DISTRESS = (
    "waiver", "covenant", "forbearance", "insolvency", "liquidity",
    "collateral", "indenture", "severance", "downgrade", "impairment",
)

config = SyntheticConfig(
    n_companies=400,
    year_range=(2009, 2020),
    base_bankruptcy_rate=0.04,
    distress_lexicon=DISTRESS,
    distress_injection_rate=0.9,
    missing_mechanisms=MissingMechanisms(
        permanent_stop=0.04,     # firms that delist and never file again
        random_gap=0.03,         # isolated skipped years
        pre_bankruptcy_silence=0.15,  # failures that stop filing early
    ),
    doc_length_mean=150,
    doc_length_std=30,
    rng_seed=42,
    background_vocab_size=5000,
)
companies = generate_synthetic(config)
print(f"generated {len(companies)} companies")

# ----------------------------------------------------------------------
# 2. Activity profile
# ----------------------------------------------------------------------
stats = corpus_stats(companies)
print(f"\nreports:       {stats.n_reports}")
print(f"bankruptcies:  {stats.n_bankruptcies}")
print(f"doc length:    {stats.doc_length_mean:.1f} "
      f"(std {stats.doc_length_std:.1f}) tokens")
print("\nper-year means (mean, std):")
for name, (mean, std) in stats.yearly_summary().items():
    print(f"  {name:<24s} {mean:8.1f}  {std:7.1f}")

print("\nreports filed per year:")
for year in sorted(stats.reports_per_year):
    count = stats.reports_per_year[year]
    bar = "#" * (count // 10)
    print(f"  {year}  {count:4d}  {bar}")

# ----------------------------------------------------------------------
# 3. Round-trip through the JSONL loader
# ----------------------------------------------------------------------
# A corpus directory is two line-delimited JSON files: reports.jsonl
# (cik, period_of_report, filing_date, mdna) and bankruptcies.jsonl
# (cik, filing_date, chapter).
corpus_dir = OUT / "corpus"
write_corpus_dir(companies, corpus_dir)
loaded = load_corpus_dir(corpus_dir)
assert len(loaded.companies) == len(companies)
print(f"\nround-trip: {len(loaded.companies)} companies re-loaded, "
      f"{loaded.total_warnings} warnings")

# ----------------------------------------------------------------------
# 4. Loader hygiene on dirty input
# ----------------------------------------------------------------------
# The loader quarantines structural problems instead of crashing:
# reports filed after the company's bankruptcy are dropped (they would
# leak the outcome into the text history), a second report in the same
# filing year is dropped, and date-order violations are rejected.
dirty = OUT / "dirty"
dirty.mkdir(exist_ok=True)
rows = [
    {"cik": "0001", "period_of_report": "2014-12-31",
     "filing_date": "2015-03-01", "mdna": "steady results"},
    # filed AFTER the bankruptcy below -> dropped
    {"cik": "0001", "period_of_report": "2015-12-31",
     "filing_date": "2016-03-01", "mdna": "post-petition report"},
    # period end after filing date -> rejected
    {"cik": "0002", "period_of_report": "2016-12-31",
     "filing_date": "2016-03-01", "mdna": "time travel"},
]
(dirty / "reports.jsonl").write_text(
    "".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
(dirty / "bankruptcies.jsonl").write_text(
    json.dumps({"cik": "0001", "filing_date": "2015-11-20", "chapter": 11})
    + "\n", encoding="utf-8")

report = load_corpus_dir(dirty)
print("\nloader counters on the dirty corpus:")
print(f"  dropped_post_bankruptcy  {report.dropped_post_bankruptcy}")
print(f"  rejected_date_order      {report.rejected_date_order}")
print(f"  duplicate_year_reports   {report.duplicate_year_reports}")
print(f"  kept companies           {len(report.companies)}")
print(f"\nartifacts in {OUT}")
