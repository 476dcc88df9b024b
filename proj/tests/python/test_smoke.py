from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

import homophily as h

TWO_FIELDS = Path(__file__).resolve().parents[1] / "fixtures" / "two_fields"


def alpha_oracle(papers):
    male, female = [], []
    for p in papers:
        males = p.count("M")
        for g in p:
            other = Fraction(males - (g == "M"), len(p) - 1)
            (male if g == "M" else female).append(other)
    return sum(male) / len(male) - sum(female) / len(female)


@pytest.fixture
def two_fields():
    corpus, report = h.ingest_corpus(
        TWO_FIELDS / "papers.tsv", TWO_FIELDS / "authorships.tsv", TWO_FIELDS / "hierarchy.tsv", TWO_FIELDS / "flows.tsv"
    )
    return corpus


def test_ingest(two_fields):
    assert two_fields.n_papers == 8
    assert two_fields.n_authorships == 22
    assert set(two_fields.terminal_ids) == {"A", "B"}
    assert two_fields.level("A") == "top"


def test_builder_matches_ingest(two_fields):
    b = h.CorpusBuilder()
    ids = {f: b.add_field(f) for f in ("A", "B")}
    for pid, field, year, genders in two_fields.papers():
        b.add_paper(ids[field], genders, year, pid)
    b.add_flow(ids["A"], ids["A"], 0.97)
    b.add_flow(ids["A"], ids["B"], 0.03)
    b.add_flow(ids["B"], ids["B"], 0.97)
    b.add_flow(ids["B"], ids["A"], 0.03)
    assert b.build() == two_fields


def test_alpha_against_oracle(two_fields):
    papers = [g for *_, g in two_fields.papers()]
    assert h.compute_alpha_exact(papers) == alpha_oracle(papers)
    assert h.compute_alpha(papers)["alpha"] == pytest.approx(float(alpha_oracle(papers)))
    assert h.field_alpha(two_fields, "ALL")["alpha"] == pytest.approx(0.45)
    assert h.compute_alpha_exact(["FF", "FF"]) is None


def test_undefined_input_raises():
    with pytest.raises(h.HomophilyError, match="metrics"):
        h.compute_alpha(["M"])
    with pytest.raises(ValueError):
        h.compute_alpha(["MX"])


def test_swap_matrix_rows(two_fields):
    d = h.build_swap_matrix(two_fields).dense()
    assert d.shape == (2, 2)
    assert np.array_equal(d, np.eye(2))
    linked = h.build_swap_matrix(two_fields, 0.01).dense()
    assert np.allclose(linked, linked.T)
    assert (linked > 0).all()


def test_chain_is_seeded(two_fields):
    m = h.build_swap_matrix(two_fields)
    plan = h.ChainPlan(iterations=600, burn_in=100, seed=4)
    a, b = h.run_chain(two_fields, m, plan), h.run_chain(two_fields, m, plan)
    assert plan.samples == 500
    assert np.array_equal(a.trace("ALL"), b.trace("ALL"), equal_nan=True)
    assert len(a.trace("A")) == 500
    assert 0 < a.acceptance_rate <= 1


def test_full_test(two_fields):
    res = h.run_test(two_fields, chains=2, iterations=3000, burn_in=500)
    root = res.field("ALL")
    assert root["observed_alpha"] == pytest.approx(0.45)
    assert 0 <= root["p"] <= 1
    assert root["adjusted_p"] >= root["p"]
    d = res.to_dict()
    assert isinstance(d, dict)
    assert len(res.runs) == 2
    ks = h.compare_chains(res.runs, reps=100)
    assert isinstance(ks, dict)
    assert res.results_table().startswith("field")


def test_fdr():
    adj, rej = h.fdr_adjust([0.01, 0.04, 0.03, 0.5], "BH", 0.05)
    m = 4
    order = sorted(range(m), key=lambda i: [0.01, 0.04, 0.03, 0.5][i])
    p = sorted([0.01, 0.04, 0.03, 0.5])
    oracle = [min(min(p[j] * m / (j + 1) for j in range(k, m)), 1) for k in range(m)]
    assert np.allclose([adj[i] for i in order], oracle)
    assert rej == [a <= 0.05 for a in adj]
    by, _ = h.fdr_adjust([0.01, 0.04, 0.03, 0.5], "BY", 0.05)
    assert np.all(by >= adj)


def test_ks():
    r = h.ks_two_sample([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], reps=200)
    assert r["statistic"] == 0 and r["p_value"] == 1
    r = h.ks_two_sample(list(range(10)), list(range(100, 110)), reps=500, seed=3)
    assert r["statistic"] == 1 and r["p_value"] < 0.01
    u = h.ks_uniformity(list(np.linspace(0.01, 0.99, 50)))
    assert u["p_value"] > 0.9


def test_sensitivity_and_imputation():
    b = h.CorpusBuilder()
    t = b.add_field("T")
    for i in range(20):
        b.add_paper(t, "MFU" if i % 2 else "MMU")
    c = b.build()
    assert c.count_gender("U") == 20
    imputed = h.impute_missing(c, "high", 3)
    assert imputed.count_gender("U") == 0
    assert imputed == h.impute_missing(c, "high", 3)
    rep = h.run_sensitivity(c, "low", imputations=2, chain=h.ChainPlan(iterations=400, burn_in=100))
    assert len(rep["rows"]) == 2


def test_gee_intercept_closed_form():
    fit = h.fit_gee_logistic([[1.0]] * 8, [1, 0, 0, 0, 1, 0, 0, 0], [0, 0, 1, 1, 2, 2, 3, 3])
    assert fit["converged"]
    assert fit["terms"][0]["estimate"] == pytest.approx(np.log(1 / 3))


def test_synthetic_and_exact_null():
    spec = h.tree_spec(top_fields=2, leaves_per_top=2, papers_per_leaf=5)
    corpus = h.generate_corpus(spec)
    assert corpus.n_papers == 20
    assert corpus == h.generate_corpus(spec)

    b = h.CorpusBuilder()
    a = b.add_field("A")
    b.add_paper(a, "MF")
    b.add_paper(a, "FF")
    small = b.build()
    exact = h.enumerate_null_exact(small, h.build_swap_matrix(small))
    assert isinstance(exact, dict)


def test_corpus_round_trip(tmp_path, two_fields):
    two_fields.write(tmp_path / "c")
    assert h.load_corpus(tmp_path / "c") == two_fields
