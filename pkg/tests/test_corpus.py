"""Corpus ingestion rules and synthetic generator calibration."""

from __future__ import annotations

import datetime as dt
import json
import math

import pytest

from bankbench.corpus import (
    BankruptcyFiling,
    Company,
    CorpusError,
    MissingMechanisms,
    Report,
    SyntheticConfig,
    corpus_stats,
    format_stats,
    generate_synthetic,
    generate_synthetic_with_trace,
    load_corpus,
    write_corpus,
)

LEXICON = (
    "waiver", "covenant", "forbearance", "insolvency", "liquidity",
    "collateral", "indenture", "severance", "downgrade", "impairment",
    "foreclosure", "creditor", "deficit", "turnaround", "moratorium",
    "distress", "default", "receivership", "deterioration", "noncompliance",
)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def report_rec(cik, period, filed, mdna="Revenue grew modestly."):
    return {"cik": cik, "period_of_report": period, "filing_date": filed, "mdna": mdna}


def small_config(**overrides) -> SyntheticConfig:
    base = dict(
        n_companies=150,
        year_range=(2009, 2020),
        base_bankruptcy_rate=0.02,
        distress_lexicon=LEXICON,
        distress_injection_rate=0.9,
        missing_mechanisms=MissingMechanisms(0.05, 0.05, 0.2),
        doc_length_mean=80.0,
        doc_length_std=15.0,
        rng_seed=42,
        background_vocab_size=2_000,
    )
    base.update(overrides)
    return SyntheticConfig(**base)


class TestLoadCorpus:
    def test_basic_join(self, tmp_path):
        reports = tmp_path / "reports.jsonl"
        bankruptcies = tmp_path / "bankruptcies.jsonl"
        write_jsonl(reports, [
            report_rec("0000001", "2014-12-31", "2015-03-02"),
            report_rec("0000001", "2015-12-31", "2016-02-26"),
            report_rec("0000002", "2015-12-31", "2016-03-15"),
        ])
        write_jsonl(bankruptcies, [
            {"cik": "0000001", "filing_date": "2016-09-12", "chapter": 11},
        ])
        load = load_corpus(reports, bankruptcies)
        assert load.total_warnings == 0
        assert [c.company_id for c in load.companies] == ["0000001", "0000002"]
        failed, healthy = load.companies
        assert failed.bankruptcy is not None and failed.bankruptcy.chapter == 11
        assert len(failed.reports) == 2
        assert healthy.bankruptcy is None

    def test_empty_bankruptcies_file(self, tmp_path):
        reports = tmp_path / "reports.jsonl"
        bankruptcies = tmp_path / "bankruptcies.jsonl"
        write_jsonl(reports, [report_rec("0000009", "2014-12-31", "2015-03-02")])
        bankruptcies.write_text("")
        load = load_corpus(reports, bankruptcies)
        assert len(load.companies) == 1
        assert load.companies[0].bankruptcy is None

    def test_report_after_bankruptcy_dropped_with_warning(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        write_jsonl(reports, [
            report_rec("0000001", "2014-12-31", "2015-03-02"),
            report_rec("0000001", "2015-12-31", "2016-02-26"),  # after bankruptcy
        ])
        write_jsonl(bankruptcies, [
            {"cik": "0000001", "filing_date": "2015-11-03", "chapter": 7},
        ])
        load = load_corpus(reports, bankruptcies)
        assert load.dropped_post_bankruptcy == 1
        assert len(load.companies[0].reports) == 1

    def test_malformed_json_reports_line_number(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        reports.write_text(
            json.dumps(report_rec("0000001", "2014-12-31", "2015-03-02"))
            + "\n{not json\n"
        )
        bankruptcies.write_text("")
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(reports, bankruptcies)

    def test_missing_key_is_error(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        write_jsonl(reports, [{"cik": "1", "filing_date": "2015-03-02", "mdna": "x"}])
        bankruptcies.write_text("")
        with pytest.raises(CorpusError, match="period_of_report"):
            load_corpus(reports, bankruptcies)

    def test_duplicate_filing_key_is_error(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        record = report_rec("0000001", "2014-12-31", "2015-03-02")
        write_jsonl(reports, [record, record])
        bankruptcies.write_text("")
        with pytest.raises(CorpusError, match="duplicate"):
            load_corpus(reports, bankruptcies)

    def test_filing_before_period_rejected_with_warning(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        write_jsonl(reports, [
            report_rec("0000001", "2015-12-31", "2015-03-02"),  # impossible order
            report_rec("0000002", "2014-12-31", "2015-03-02"),
        ])
        bankruptcies.write_text("")
        load = load_corpus(reports, bankruptcies)
        assert load.rejected_date_order == 1
        assert [c.company_id for c in load.companies] == ["0000002"]

    def test_same_year_amendment_keeps_earliest(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        write_jsonl(reports, [
            report_rec("0000001", "2014-12-31", "2015-06-01", mdna="amended"),
            report_rec("0000001", "2014-12-31", "2015-03-02", mdna="original"),
        ])
        bankruptcies.write_text("")
        load = load_corpus(reports, bankruptcies)
        assert load.duplicate_year_reports == 1
        assert load.companies[0].reports[0].mdna_text == "original"

    def test_invalid_chapter_is_error(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        write_jsonl(reports, [report_rec("0000001", "2014-12-31", "2015-03-02")])
        write_jsonl(bankruptcies, [{"cik": "0000001", "filing_date": "2016-01-01", "chapter": 13}])
        with pytest.raises(CorpusError, match="chapter"):
            load_corpus(reports, bankruptcies)

    def test_multiple_bankruptcy_filings_keep_earliest(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        write_jsonl(reports, [report_rec("0000001", "2014-12-31", "2015-03-02")])
        write_jsonl(bankruptcies, [
            {"cik": "0000001", "filing_date": "2017-05-01", "chapter": 11},
            {"cik": "0000001", "filing_date": "2016-04-01", "chapter": 7},
        ])
        load = load_corpus(reports, bankruptcies)
        assert load.extra_bankruptcy_filings == 1
        assert load.companies[0].bankruptcy.filing_date == dt.date(2016, 4, 1)

    def test_bankruptcy_without_reports_still_a_company(self, tmp_path):
        reports = tmp_path / "r.jsonl"
        bankruptcies = tmp_path / "b.jsonl"
        reports.write_text("")
        write_jsonl(bankruptcies, [{"cik": "0000042", "filing_date": "2016-01-01", "chapter": 7}])
        load = load_corpus(reports, bankruptcies)
        assert len(load.companies) == 1
        assert load.companies[0].reports == ()


class TestCompanyInvariants:
    def test_reports_must_be_ordered(self):
        r1 = Report("1", dt.date(2014, 12, 31), dt.date(2015, 3, 2), "x")
        r2 = Report("1", dt.date(2015, 12, 31), dt.date(2016, 2, 26), "y")
        with pytest.raises(ValueError, match="ordered"):
            Company("1", (r2, r1))

    def test_one_report_per_calendar_year(self):
        r1 = Report("1", dt.date(2014, 12, 31), dt.date(2015, 3, 2), "x")
        r2 = Report("1", dt.date(2014, 6, 30), dt.date(2015, 9, 1), "y")
        with pytest.raises(ValueError, match="2015"):
            Company("1", (r1, r2))

    def test_no_post_bankruptcy_reports(self):
        r1 = Report("1", dt.date(2014, 12, 31), dt.date(2015, 3, 2), "x")
        filing = BankruptcyFiling("1", dt.date(2015, 3, 2), 11)
        with pytest.raises(ValueError, match="bankruptcy"):
            Company("1", (r1,), filing)

    def test_filing_before_period_rejected_at_type_level(self):
        with pytest.raises(ValueError):
            Report("1", dt.date(2015, 12, 31), dt.date(2015, 3, 2), "x")

    def test_lookup_helpers(self):
        r1 = Report("1", dt.date(2014, 12, 31), dt.date(2015, 3, 2), "x")
        r2 = Report("1", dt.date(2016, 12, 31), dt.date(2017, 2, 26), "y")
        company = Company("1", (r1, r2))
        assert company.report_in_year(2015) is r1
        assert company.report_in_year(2016) is None
        assert company.latest_report_filed_by(dt.date(2016, 12, 31)) is r1
        assert company.latest_report_filed_by(dt.date(2014, 12, 31)) is None
        assert company.first_report_year() == 2015


class TestWriteCorpus:
    def test_round_trip(self, tmp_path):
        companies = generate_synthetic(small_config(n_companies=40))
        r1, b1 = tmp_path / "r1.jsonl", tmp_path / "b1.jsonl"
        r2, b2 = tmp_path / "r2.jsonl", tmp_path / "b2.jsonl"
        write_corpus(companies, r1, b1)
        load = load_corpus(r1, b1)
        assert load.total_warnings == 0
        write_corpus(load.companies, r2, b2)
        assert r1.read_bytes() == r2.read_bytes()
        assert b1.read_bytes() == b2.read_bytes()


class TestSyntheticGenerator:
    def test_same_seed_identical_bytes(self, tmp_path):
        config = small_config()
        a = generate_synthetic(config)
        b = generate_synthetic(config)
        ra, ba = tmp_path / "ra.jsonl", tmp_path / "ba.jsonl"
        rb, bb = tmp_path / "rb.jsonl", tmp_path / "bb.jsonl"
        write_corpus(a, ra, ba)
        write_corpus(b, rb, bb)
        assert ra.read_bytes() == rb.read_bytes()
        assert ba.read_bytes() == bb.read_bytes()

    def test_different_seed_differs(self):
        a = generate_synthetic(small_config(rng_seed=1))
        b = generate_synthetic(small_config(rng_seed=2))
        texts_a = [r.mdna_text for c in a for r in c.reports]
        texts_b = [r.mdna_text for c in b for r in c.reports]
        assert texts_a != texts_b

    def test_zero_injection_rate_means_no_distress_tokens(self):
        companies = generate_synthetic(small_config(distress_injection_rate=0.0))
        lexicon = set(LEXICON)
        for company in companies:
            for report in company.reports:
                tokens = set(report.mdna_text.lower().replace(".", " ").split())
                assert not (tokens & lexicon)

    def test_bankruptcy_rate_within_band(self):
        config = small_config(
            n_companies=2_000, base_bankruptcy_rate=0.005, rng_seed=7,
            doc_length_mean=40.0, doc_length_std=5.0,
        )
        _, trace = generate_synthetic_with_trace(config)
        realized = trace.bankruptcies / trace.at_risk_firm_years
        assert 0.002 <= realized <= 0.009

    def test_missing_mechanisms_within_3_sigma(self):
        config = small_config(
            n_companies=3_000, rng_seed=11, doc_length_mean=35.0, doc_length_std=5.0,
            missing_mechanisms=MissingMechanisms(0.06, 0.05, 0.25),
            base_bankruptcy_rate=0.02,
        )
        _, trace = generate_synthetic_with_trace(config)

        def band(observed, n, p):
            sigma = math.sqrt(p * (1.0 - p) / n)
            assert abs(observed / n - p) <= 3.0 * sigma, (observed, n, p)

        band(trace.permanent_stops, trace.healthy_companies, 0.06)
        band(trace.gap_years, trace.gap_candidate_years, 0.05)
        band(trace.silenced_companies, trace.bankruptcies, 0.25)

    def test_doc_lengths_calibrated(self):
        config = small_config(n_companies=400, doc_length_mean=120.0, doc_length_std=20.0)
        companies = generate_synthetic(config)
        stats = corpus_stats(companies)
        assert abs(stats.doc_length_mean - 120.0) / 120.0 <= 0.10
        assert abs(stats.doc_length_std - 20.0) / 20.0 <= 0.50  # injection widens tails

    def test_all_companies_have_valid_structure(self):
        # Company.__post_init__ enforces ordering/pre-bankruptcy invariants;
        # construction succeeding for every company is the assertion
        companies = generate_synthetic(small_config())
        assert len(companies) == 150
        assert any(c.bankruptcy is not None for c in companies)
        assert all(c.reports or c.bankruptcy for c in companies)

    def test_degenerate_configs_rejected(self):
        with pytest.raises(ValueError, match="n_companies"):
            small_config(n_companies=0).validate()
        with pytest.raises(ValueError, match="span"):
            small_config(year_range=(2018, 2020)).validate()
        with pytest.raises(ValueError, match="lexicon"):
            small_config(distress_lexicon=()).validate()
        with pytest.raises(ValueError, match="injection"):
            small_config(distress_injection_rate=1.5).validate()
        with pytest.raises(ValueError, match="survive"):
            small_config(distress_lexicon=("the",)).validate()

    def test_config_json_roundtrip(self):
        config = small_config()
        back = SyntheticConfig.from_dict(json.loads(json.dumps(config.to_dict())))
        assert back == config


class TestCorpusStats:
    def test_single_report(self):
        report = Report("1", dt.date(2014, 12, 31), dt.date(2015, 3, 2),
                        "ten little tokens spread over one short narrative here now")
        stats = corpus_stats([Company("1", (report,))])
        assert stats.doc_length_mean == 10.0
        assert stats.doc_length_std == 0.0
        assert stats.reports_per_year == {2015: 1}
        assert stats.new_companies_per_year == {2015: 1}

    def test_counts_add_up(self):
        companies = generate_synthetic(small_config())
        stats = corpus_stats(companies)
        assert stats.n_reports == sum(stats.reports_per_year.values())
        assert stats.n_bankruptcies == sum(stats.bankruptcies_per_year.values())
        assert sum(stats.new_companies_per_year.values()) == sum(
            1 for c in companies if c.reports
        )

    def test_format_stats_runs(self):
        companies = generate_synthetic(small_config(n_companies=30))
        text = format_stats(corpus_stats(companies))
        assert "companies: 30" in text
        assert "reports_per_year" in text
