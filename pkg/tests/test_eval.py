import math
import random

import pytest

from galla.data import make_child_pred, make_downstream, make_edge_pred, make_parent_pred
from galla.data import templates as T
from galla.eval.metrics import (
    DisjointnessViolation,
    EmptySet,
    assert_disjoint,
    eval_downstream,
    eval_graphqa,
    parse_answer,
    score_qa,
    two_proportion_test,
)
from galla.minilang import graph_from_source
from galla.nn.bpe import train_bpe
from galla.nn.model import GallaModel, ModelConfig
from galla.train.encode import SampleEncoder

ADD = "def add(a, b): return a+b"


def test_parse_answer_families():
    assert parse_answer("EdgePred", "Yes, that is the case.") == ("positive", {})
    assert parse_answer("EdgePred", "No, such an edge is absent from the graph.")[0] == "negative"
    assert parse_answer("EdgePred", "Maybe?") is None
    fam, fields = parse_answer("ChildPred", 'This binary expression has 2 children: variable "a", variable "b"')
    assert fam == "positive" and fields["child_num"] == "2"


def test_edge_scoring_ignores_wording():
    assert score_qa("EdgePred", "Yes, that is the case.",
                    'Yes, there is an edge from variable "a" to binary expression "a+b".') == (True, True)
    assert score_qa("EdgePred", "Yes, that is the case.", "No, that is not the case.") == (False, True)
    assert score_qa("EdgePred", "No, that is not the case.", "garbled text") == (False, False)


def test_parent_scoring_checks_the_named_parent():
    ref = T.fill(T.PARENT_PRED.answer_templates_positive[1], node_type="variable", parent='"a+b"',
                 parent_type="binary expression")
    right = T.fill(T.PARENT_PRED.answer_templates_positive[2], node_type="variable", parent='"a+b"',
                   parent_type="binary expression")
    wrong = T.fill(T.PARENT_PRED.answer_templates_positive[2], node_type="variable", parent='"a"',
                   parent_type="parameter")
    assert score_qa("ParentPred", ref, right) == (True, True)
    assert score_qa("ParentPred", ref, wrong) == (False, True)


def test_reference_must_parse():
    with pytest.raises(ValueError):
        score_qa("ChildPred", "not a template", "whatever")


def test_two_proportion_test_matches_closed_form():
    k1, n1, k2, n2 = 70, 100, 50, 100
    a, b, c, d = k1, n1 - k1, k2, n2 - k2
    n = a + b + c + d
    expected = n * (a * d - b * c) ** 2 / ((a + b) * (c + d) * (a + c) * (b + d))
    chi2, p = two_proportion_test(k1, n1, k2, n2)
    assert chi2 == pytest.approx(expected, rel=1e-12)
    assert p == pytest.approx(0.003892, abs=1e-5)
    # The 5% critical value of chi-squared with one degree of freedom.
    assert math.erfc(math.sqrt(3.841459 / 2)) == pytest.approx(0.05, abs=1e-6)
    assert two_proportion_test(5, 10, 5, 10) == (0.0, 1.0)
    with pytest.raises(EmptySet):
        two_proportion_test(0, 0, 1, 2)


def test_disjointness():
    assert_disjoint(["a", None], ["b", None])
    with pytest.raises(DisjointnessViolation):
        assert_disjoint(["a", "b"], ["b"])


@pytest.fixture(scope="module")
def tiny():
    rng = random.Random(0)
    g = graph_from_source("add", ADD)
    samples = [make_edge_pred(g, k) for k in range(4)] + [make_parent_pred(g, "AST", 1),
                                                           make_child_pred(g, "DFG", 2)]
    tok = train_bpe([ADD] + [s.prompt + s.answer for s in samples], 300)
    sub = train_bpe([ADD], 270, specials=())
    cfg = ModelConfig(d_lm=16, n_layers=1, n_heads=2, context=256, d_node=8, d_gnn=8, gnn_layers=1, n_g=2)
    model = GallaModel(cfg, tok, sub, seed=rng.randrange(100))
    return model, SampleEncoder(tok, sub, {"add": g}), samples, g


def test_untrained_model_answers_count_as_unparseable(tiny):
    model, enc, samples, _ = tiny
    results = eval_graphqa(model, enc, samples, max_new=8)
    assert [r.task for r in results] == ["EdgePred", "ParentPred", "ChildPred"]
    assert sum(r.n for r in results) == len(samples)
    assert all(r.unparseable == r.n - r.correct for r in results)
    rec = results[0].to_record("run1")
    assert rec["run_id"] == "run1" and rec["metric"] == "accuracy"


def test_eval_rejects_empty_and_leaky_sets(tiny):
    model, enc, samples, g = tiny
    with pytest.raises(EmptySet):
        eval_graphqa(model, enc, [])
    with pytest.raises(EmptySet):
        eval_downstream(model, enc, samples)
    with pytest.raises(DisjointnessViolation):
        eval_graphqa(model, enc, samples, train_graph_ids=["add"], max_new=2)
    res = eval_downstream(model, enc, [make_downstream(g, 0)], max_new=4)
    assert res.n == 1 and res.value in (0.0, 1.0)
