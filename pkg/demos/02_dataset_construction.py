"""Leakage-safe temporal dataset construction
=============================================

A firm-year instance asks: given everything company X had filed by its
fiscal-year report, does it go bankrupt within the following year?  The
window starts at the filing date (or an imputed anchor when the year's
report is missing), the label is 1 iff a bankruptcy petition lands
inside [window_start, window_start + 1 year), and the text history can
only contain reports filed on or before the window start.

This script
1. builds instances for one bankrupt company by hand,
2. shows the imputed-window and missing-text mechanics,
3. assembles the training population (stop at first positive,
   all-missing subsampling) and the evaluation populations, and
4. verifies the temporal ordering that makes the split leakage-safe.
"""

import dataclasses
import datetime as dt

from bankbench.corpus import BankruptcyFiling, Company, Report
from bankbench.sampling import (
    SplitSpec,
    build_eval_set,
    build_instance,
    build_training_set,
    instances_for_company,
)
from bankbench.textprep import MISSING_TOKEN


def report(cik: str, year: int, text: str) -> Report:
    """A report filed March 15 covering the prior fiscal year."""
    return Report(
        company_id=cik,
        period_end=dt.date(year - 1, 12, 31),
        filing_date=dt.date(year, 3, 15),
        mdna_text=text,
    )


# ----------------------------------------------------------------------
# 1. One company, one bankruptcy
# ----------------------------------------------------------------------
# Files 2012-2016, stops reporting, and petitions in June 2018.  The
# last two fiscal years before the failure were never filed.
failing = Company(
    company_id="0007",
    reports=tuple(
        report("0007", y, f"fiscal {y - 1} narrative")
        for y in range(2012, 2017)
    ),
    bankruptcy=BankruptcyFiling(
        company_id="0007", filing_date=dt.date(2018, 6, 1), chapter=11
    ),
)

print("firm-year instances for the failing company (history length 1):")
for inst in instances_for_company(failing, range(2012, 2021), history_len=1):
    text = inst.history_texts[0]
    shown = text if text == MISSING_TOKEN else text[:24]
    print(
        f"  year {inst.considered_year}  window {inst.window_start} "
        f"label {inst.label}  imputed {str(inst.imputed):<5s}  text '{shown}'"
    )

# 2017 has no filing, so the window start is imputed by transposing the
# month/day of the latest earlier filing into 2017 -- and the single
# history slot becomes the sentinel token, because the text that would
# fill it was never filed.
inst_2017 = build_instance(failing, 2017, history_len=1)
assert inst_2017.imputed and inst_2017.history_texts == (MISSING_TOKEN,)
# 2018 is the positive: the June 2018 petition falls inside the window
# anchored at the imputed 2018-03-15.
inst_2018 = build_instance(failing, 2018, history_len=1)
assert inst_2018.label == 1
# 2019's window would start after the petition -- the company is
# already gone, so no instance exists at all.
assert build_instance(failing, 2019, history_len=1) is None
print("\n2019 (post-bankruptcy) forms no instance: correct\n")

# With three years of history the 2016 instance still only sees reports
# filed by its window start.
inst3 = build_instance(failing, 2016, history_len=3)
print("history length 3 at considered year 2016 (oldest slot first):")
for offset, slot in enumerate(inst3.history_texts):
    year = inst3.considered_year - 2 + offset
    shown = slot if slot == MISSING_TOKEN else slot[:24]
    print(f"  slot {year}: '{shown}'")

# ----------------------------------------------------------------------
# 2. A population: healthy, gappy, and silent companies
# ----------------------------------------------------------------------
companies = [failing]
for i in range(8):  # healthy continuous filers
    cik = f"1{i:03d}"
    companies.append(
        Company(cik,
                tuple(report(cik, y, f"healthy {i} year {y}")
                      for y in range(2011, 2021)), None)
    )
for i in range(4):  # a reporting gap in 2015
    cik = f"2{i:03d}"
    companies.append(
        Company(cik,
                tuple(report(cik, y, f"gappy {i} year {y}")
                      for y in range(2011, 2021) if y != 2015), None)
    )
companies.append(  # delisted early: fails the 5-year activity screen later
    Company("3000",
            tuple(report("3000", y, f"stopped year {y}")
                  for y in range(2011, 2014)),
            None)
)

split = SplitSpec(
    train_cutoff_year=2016,
    validation_years=(2018,),
    test_years=(2020,),
    history_len=1,
    all_missing_keep_rate=1.0,
)

# ----------------------------------------------------------------------
# 3. Training and evaluation populations
# ----------------------------------------------------------------------
train = build_training_set(companies, split)
n_missing = sum(inst.all_missing for inst in train)
print(f"\ntraining instances through {split.train_cutoff_year}: "
      f"{len(train)} ({n_missing} with an all-missing history)")

# All-missing instances carry no text signal; in real corpora they
# dominate, so the builder keeps only a seeded fraction of them.
sparse = dataclasses.replace(split, all_missing_keep_rate=0.0)
print(f"with all-missing keep rate 0.0: "
      f"{len(build_training_set(companies, sparse))} instances")

for year in (2018, 2020):
    population = build_eval_set(companies, year, split)
    ids = {inst.company_id for inst in population}
    note = "" if "3000" in ids else "  (delisted company screened out)"
    print(f"evaluation {year}: {len(population)} companies, "
          f"{sum(i.label for i in population)} positive{note}")

# ----------------------------------------------------------------------
# 4. The ordering that makes it leakage-safe
# ----------------------------------------------------------------------
eval_sets = [build_eval_set(companies, y, split) for y in (2018, 2020)]
latest_train = max(inst.window_start for inst in train)
earliest_eval = min(inst.window_start for s in eval_sets for inst in s)
print(f"\nlatest training anchor:    {latest_train}")
print(f"earliest evaluation anchor: {earliest_eval}")
assert latest_train < earliest_eval
print("training anchors strictly precede evaluation anchors: correct")
