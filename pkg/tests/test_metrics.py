from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrtrainer import reference_stats
from mrtrainer.metrics import (
    ABSTAIN,
    LengthMismatch,
    MetricReport,
    bleu4,
    entity_acc,
    evaluate,
    metric_stddev,
    render_table,
    rouge_l,
    rouge_n,
    tokenize,
)

from .oracles import oracle_bleu4, oracle_rouge_l, oracle_rouge_n

TOKENS = st.lists(st.sampled_from(list("abcdefgh")), max_size=12)


# -- tokenize ---------------------------------------------------------------

def test_tokenize_strips_edge_punctuation():
    assert tokenize("Place the upper body!") == ["place", "the", "upper", "body"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_keeps_inner_punctuation():
    assert tokenize("1x2 plate,") == ["1x2", "plate"]


def test_tokenize_drops_punctuation_only_tokens():
    assert tokenize("well -- yes ...") == ["well", "yes"]


# -- bleu -------------------------------------------------------------------

def test_bleu_identity():
    seq = ["press", "the", "antenna", "down", "firmly"]
    assert bleu4(seq, seq) == pytest.approx(1.0)


def test_bleu_disjoint_is_negligible():
    assert bleu4(list("abcd"), list("wxyz")) <= 1e-2


def test_bleu_hand_computed_overlap():
    # p1=4/5, p2=3/4, p3=2/3, p4=1/2, BP=1 -> (0.2)^(1/4)
    got = bleu4(list("abcde"), list("abcdf"))
    assert got == pytest.approx(0.6687, abs=5e-5)


def test_bleu_empty_candidate_scores_zero():
    assert bleu4([], list("abc")) == 0.0


# -- rouge ------------------------------------------------------------------

def test_rouge_n_identity():
    seq = ["the", "cat", "sat"]
    assert rouge_n(seq, seq, 1) == 1.0
    assert rouge_n(seq, seq, 2) == 1.0


def test_rouge_1_hand_count():
    assert rouge_n(["the", "cat"], ["the", "cat", "sat", "down"], 1) == 0.5


def test_rouge_n_disjoint():
    assert rouge_n(list("ab"), list("cd"), 1) == 0.0


def test_rouge_n_reference_shorter_than_n():
    assert rouge_n(list("abcd"), ["a"], 2) == 0.0


def test_rouge_l_hand_lcs():
    assert rouge_l(["the", "cat", "sat"], ["the", "cat", "sat", "down"]) == 0.75


def test_rouge_l_identity_and_empty():
    assert rouge_l(list("abc"), list("abc")) == 1.0
    assert rouge_l([], list("abc")) == 0.0


# -- oracle agreement (module-level sanity; the 1k-case run is acceptance) ---

@settings(max_examples=200, deadline=None)
@given(TOKENS, TOKENS)
def test_metrics_agree_with_bruteforce_oracle(cand, ref):
    assert bleu4(cand, ref) == pytest.approx(oracle_bleu4(cand, ref), abs=1e-12)
    for n in (1, 2, 3):
        assert rouge_n(cand, ref, n) == pytest.approx(oracle_rouge_n(cand, ref, n), abs=1e-12)
    assert rouge_l(cand, ref) == pytest.approx(oracle_rouge_l(cand, ref), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(TOKENS, TOKENS)
def test_scores_stay_in_unit_interval(cand, ref):
    assert 0.0 <= bleu4(cand, ref) <= 1.0
    assert 0.0 <= rouge_n(cand, ref, 2) <= 1.0
    assert 0.0 <= rouge_l(cand, ref) <= 1.0


# -- entity accuracy ----------------------------------------------------------

LEXICON = ["NextStep", "Explode", "plate 1x2", "upper body"]


def test_entity_acc_hand_case():
    ref = tokenize("Use NextStep after you Explode the view.")
    cand = tokenize("I will call NextStep now.")
    assert entity_acc(cand, ref, LEXICON) == 0.5


def test_entity_acc_abstains_without_reference_mentions():
    ref = tokenize("Nothing relevant here.")
    cand = tokenize("NextStep NextStep NextStep")
    assert entity_acc(cand, ref, LEXICON) is ABSTAIN


def test_entity_acc_identity_is_one():
    ref = tokenize("Grab the plate 1x2 and the upper body.")
    assert entity_acc(ref, ref, LEXICON) == 1.0


def test_entity_acc_requires_contiguous_sequence():
    ref = tokenize("The plate 1x2 goes on top.")
    cand = tokenize("The plate goes under the 1x2 thing.")  # split mention
    assert entity_acc(cand, ref, LEXICON) == 0.0


def test_entity_acc_case_and_noise_invariant():
    ref = tokenize("Call NextStep.")
    assert entity_acc(tokenize("NEXTSTEP!"), ref, LEXICON) == 1.0
    assert entity_acc(tokenize("well um NextStep I guess??"), ref, LEXICON) == 1.0


def test_prose_words_do_not_match_camelcase_tool():
    ref = tokenize("Call NextStep.")
    assert entity_acc(tokenize("go to the next step"), ref, LEXICON) == 0.0


# -- evaluate ----------------------------------------------------------------

def test_evaluate_identity_all_ones():
    texts = ["Call NextStep to move on.", "Attach the plate 1x2 to the upper body."]
    report = evaluate(texts, texts, ["NextStep"], ["plate 1x2", "upper body"], model_id="self")
    for name in MetricReport.METRIC_NAMES:
        assert getattr(report, name) == pytest.approx(1.0)


def test_evaluate_length_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate(["a"], ["a", "b"], [], [])


def test_evaluate_matches_per_pair_means():
    preds = ["the cat sat on the mat", "use NextStep now please"]
    refs = ["the cat sat down", "you should use NextStep"]
    report = evaluate(preds, refs, ["NextStep"], [])
    expected_rouge1 = (
        rouge_n(tokenize(preds[0]), tokenize(refs[0]), 1)
        + rouge_n(tokenize(preds[1]), tokenize(refs[1]), 1)
    ) / 2
    assert report.rouge1 == pytest.approx(expected_rouge1)
    assert report.tool_acc == pytest.approx(1.0)  # only pair 2 counts; it matches


def test_report_rejects_out_of_range_scores():
    with pytest.raises(ValueError):
        MetricReport("m", 1.2, 0, 0, 0, 0, 0)


# -- dispersion ----------------------------------------------------------------

def _reports_from_reference() -> list[MetricReport]:
    return [
        MetricReport(
            model_id=model,
            **{metric: scores[metric][1] / 100.0 for metric in MetricReport.METRIC_NAMES},
        )
        for model, scores in reference_stats.BENCHMARK_SCORES.items()
    ]


def test_stddev_reproduces_reported_dispersion():
    sd = metric_stddev(_reports_from_reference())
    for metric, expected in reference_stats.REPORTED_FINETUNED_STDDEV.items():
        assert sd[metric] == pytest.approx(expected, abs=0.05)


def test_stddev_identical_reports_is_zero():
    r = _reports_from_reference()[0]
    sd = metric_stddev([r, r, r])
    assert all(v == 0.0 for v in sd.values())


def test_stddev_invariant_under_reordering():
    reports = _reports_from_reference()
    shuffled = reports[:]
    random.Random(3).shuffle(shuffled)
    assert metric_stddev(reports) == metric_stddev(shuffled)


def test_render_table_has_stddev_row():
    table = render_table(_reports_from_reference(), stddev_row=True)
    assert table.splitlines()[-1].startswith("stddev")
    assert "19.60" in table.splitlines()[-1]
