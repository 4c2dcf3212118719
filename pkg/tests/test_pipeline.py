import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convfilter.extract.pipeline import (
    FilterSpec, best_rows, extract_labels, filter_utterances, read_sweep_csv, run_extraction,
    threshold_sweep, write_sweep_csv,
)
from convfilter.synth import PROFILES, synth_generate

from conftest import make_conv


@pytest.fixture
def conv():
    return make_conv([
        ("DR", "Any palpitations?", ["SYM"]),
        ("PT", "My neighbor swears by ibuprofen for everything.", []),
        ("DR", "Keep taking the ibuprofen.", ["MED"]),
        ("PT", "Thanks.", []),
        ("DR", "And the metformin too.", ["MED"]),
        ("DR", "Stay on it.", ["MED"]),
    ])


def probs(n, seed=0):
    r = np.random.default_rng(seed)
    fine = r.uniform(size=(n, 3))
    c = r.uniform(size=n)
    return fine, np.stack([1 - c, c], axis=1)


def test_all_text_keeps_everything(conv):
    assert filter_utterances(conv, FilterSpec("all-text")) == list(range(6))


def test_mr_tau_zero_keeps_everything(conv):
    fine, coarse = probs(6)
    assert filter_utterances(conv, FilterSpec("mr", 0.0), fine, coarse) == list(range(6))


def test_tau_one_keeps_only_certain(conv):
    fine, coarse = probs(6)
    coarse[2] = (0.0, 1.0)
    assert filter_utterances(conv, FilterSpec("mr", 1.0), fine, coarse) == [2]


def test_category_mode_uses_its_column(conv):
    fine = np.zeros((6, 3))
    fine[4, 1] = 0.9
    fine[0, 0] = 0.9
    assert filter_utterances(conv, FilterSpec("category", 0.5, "MED"), fine) == [4]


def test_union_source(conv):
    fine = np.zeros((6, 3))
    fine[3, 2] = 0.7
    assert filter_utterances(conv, FilterSpec("mr", 0.5, mr_source="union"), fine, None) == [3]
    with pytest.raises(ValueError):
        filter_utterances(conv, FilterSpec("mr", 0.5), fine, None)


def test_oracle_modes(conv):
    assert filter_utterances(conv, FilterSpec("oracle-category", category="MED")) == [2, 4, 5]
    assert filter_utterances(conv, FilterSpec("oracle-mr")) == [0, 2, 4, 5]


def test_model_modes_need_probabilities(conv):
    with pytest.raises(ValueError):
        filter_utterances(conv, FilterSpec("mr", 0.5))


def test_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec("category", 0.5)
    with pytest.raises(ValueError):
        FilterSpec("mr", 1.5)
    with pytest.raises(ValueError):
        FilterSpec("bogus")


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 1000))
def test_monotone_filtering(t1, t2, seed):
    t1, t2 = sorted((t1, t2))
    c = make_conv([("DR", "x", [])] * 6)
    fine, coarse = probs(6, seed)
    for mode, cat in (("mr", None), ("category", "SYM")):
        hi = set(filter_utterances(c, FilterSpec(mode, t2, cat), fine, coarse))
        lo = set(filter_utterances(c, FilterSpec(mode, t1, cat), fine, coarse))
        assert hi <= lo


def test_extract_empty_subset(conv, dictionary):
    assert extract_labels(conv, [], dictionary, "SYM") == set()


def test_extract_palpitations_cardiovascular(conv, dictionary):
    assert extract_labels(conv, [0], dictionary, "SYM") == {"Cardiovascular"}


def test_decoy_only_under_all_text(conv, dictionary):
    all_text = extract_labels(conv, range(6), dictionary, "MED")
    filtered = extract_labels(conv, [4], dictionary, "MED")
    ibu = extract_labels(conv, [1], dictionary, "MED")
    assert ibu and ibu <= all_text and not ibu & filtered


def test_filtering_never_adds_labels(small_corpus, dictionary):
    for c in small_corpus:
        fine, coarse = probs(len(c), 3)
        every = extract_labels(c, range(len(c)), dictionary, "MED")
        for tau in (0.2, 0.5, 0.9):
            kept = filter_utterances(c, FilterSpec("mr", tau), fine, coarse)
            assert extract_labels(c, kept, dictionary, "MED") <= every


def test_unknown_task(conv, dictionary):
    with pytest.raises(ValueError):
        extract_labels(conv, [0], dictionary, "XYZ")


def test_oracle_category_exact_on_clean_corpus(clean_corpus, dictionary):
    for task in ("SYM", "MED", "COM"):
        _, score = run_extraction(clean_corpus, FilterSpec("oracle-category", category=task), dictionary, task)
        assert score.micro_f1 == 1.0 and score.fp == 0 and score.fn == 0


def test_sweep_rows_and_boundary(small_corpus, dictionary, tmp_path):
    preds = [probs(len(c), k) for k, c in enumerate(small_corpus)]
    taus = [0.0, 0.25, 0.5, 1.0]
    rows = threshold_sweep(small_corpus, preds, dictionary, "MED", taus)
    assert len(rows) == 2 * len(taus)
    _, base = run_extraction(small_corpus, FilterSpec("all-text"), dictionary, "MED")
    mr0 = [r for r in rows if r.mode == "mr" and r.tau == 0.0][0]
    assert mr0.score.micro_f1 == base.micro_f1 and mr0.score.macro_f1 == base.macro_f1
    again = threshold_sweep(small_corpus, preds, dictionary, "MED", taus)
    assert [r.score for r in again] == [r.score for r in rows]
    p = tmp_path / "s.csv"
    write_sweep_csv(rows, p)
    assert p.read_text().splitlines()[0] == "mode,tau,micro_f1,macro_f1"
    assert len(read_sweep_csv(p)) == 8
    best = best_rows(rows)
    for mode, r in best.items():
        assert r.score.micro_f1 == max(x.score.micro_f1 for x in rows if x.mode == mode)


def test_decoys_hurt_all_text_only(dictionary):
    convs = synth_generate(PROFILES["desk"].replace(decoy_fraction=0.3), 30, 5, dictionary)
    _, all_text = run_extraction(convs, FilterSpec("all-text"), dictionary, "MED")
    _, oracle = run_extraction(convs, FilterSpec("oracle-category", category="MED"), dictionary, "MED")
    assert oracle.micro_f1 == 1.0 > all_text.micro_f1
