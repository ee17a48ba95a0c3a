import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from galla.minilang import graph_from_source
from galla.minilang.generate import random_program
from galla.nn.adapter import CrossAttnAdapter, EmptyGraph, MlpAdapter
from galla.nn.bpe import BPE, train_bpe
from galla.nn.encoder import DirectedGNN, GNNLayer, NodeFeaturizer, graph_input
from galla.nn.lm import DecoderLM
from galla.nn.model import Example, GallaModel, ModelConfig
from galla.nn.splice import AnswerBeforeGraph, check_layout, embed_layouts, make_layout
from galla.tensor import MaskEmpty, ShapeMismatch, Tensor, cross_entropy, default_dtype, parameter
from gradcheck import check

TOL = 1e-3
ADD = "def add(a, b): return a+b"


@pytest.fixture(scope="module")
def corpus():
    rng = random.Random(7)
    return [random_program(rng, max_statements=6) for _ in range(200)]


@pytest.fixture(scope="module")
def subtokens(corpus):
    return train_bpe(corpus, 300, specials=())


@pytest.fixture(scope="module")
def tokenizer(corpus):
    return train_bpe(corpus + ["Write the code for this graph.", "Yes, that is the case."], 400)


@pytest.fixture(scope="module")
def short_programs(corpus):
    return sorted(corpus, key=len)[:40]


def tiny_config(**kw):
    base = dict(d_lm=16, n_layers=2, n_heads=2, context=256, d_node=8, d_gnn=12, gnn_layers=2, n_g=4)
    base.update(kw)
    return ModelConfig(**base)


# -- tokenizer -----------------------------------------------------------------------

def test_bpe_round_trip_on_corpus_lines(corpus, tokenizer):
    lines = [line for prog in corpus for line in prog.splitlines()][:1000]
    assert len(lines) == 1000
    for line in lines:
        assert tokenizer.decode(tokenizer.encode(line)) == line


def test_bpe_basics(tokenizer, tmp_path):
    assert tokenizer.encode("") == []
    assert tokenizer.encode("a+b") == tokenizer.encode("a+b")
    assert tokenizer.vocab_size <= 2048
    text = "x = ünïcode ✓\tdone"
    assert tokenizer.decode(tokenizer.encode(text)) == text
    tokenizer.save(tmp_path / "vocab.tsv")
    again = BPE.load(tmp_path / "vocab.tsv")
    assert again.merges == tokenizer.merges and again.eot_id == tokenizer.eot_id
    assert again.encode("def f(a): return a") == tokenizer.encode("def f(a): return a")


# -- featurizer ------------------------------------------------------------------------

def test_identical_nodes_get_identical_features(subtokens):
    g = graph_from_source("p", "x = a + a\n")
    inp = graph_input(g, "AST", subtokens)
    feat = NodeFeaturizer(np.random.default_rng(0), subtokens.vocab_size, 8)
    v = feat(inp).data
    reads = [n.idx for n in g.nodes if n.node_type == "Variable" and g.text(n.idx) == "a"]
    assert len(reads) == 2
    np.testing.assert_array_equal(v[reads[0]], v[reads[1]])


def test_feature_is_mean_subtoken_plus_type_embedding(subtokens):
    g = graph_from_source("add", ADD)
    feat = NodeFeaturizer(np.random.default_rng(1), subtokens.vocab_size, 8)
    v = feat(graph_input(g, "AST", subtokens)).data
    idx = next(n.idx for n in g.nodes if n.node_type == "Variable" and g.text(n.idx) == "a")
    ids = subtokens.encode("a")
    expected = feat.sub_emb.data[ids].mean(axis=0) + feat.type_emb.data[13]
    np.testing.assert_allclose(v[idx], expected, rtol=1e-6)
    feat.type_emb.data[:] = 0
    v0 = feat(graph_input(g, "AST", subtokens)).data
    np.testing.assert_allclose(v0[idx], feat.sub_emb.data[ids].mean(axis=0), rtol=1e-6)


# -- GNN ---------------------------------------------------------------------------------

def test_gnn_without_edges_does_not_mix_nodes():
    rng = np.random.default_rng(2)
    gnn = DirectedGNN(rng, 4, 6, 2)
    v = rng.standard_normal((5, 4))
    h = gnn(Tensor(v), np.zeros((0, 2))).data
    for i in range(5):
        alone = gnn(Tensor(v[i : i + 1]), np.zeros((0, 2))).data
        np.testing.assert_allclose(h[i], alone[0], rtol=1e-5, atol=1e-6)


def _gelu(x):
    return 0.5 * x * (1 + np.tanh(math.sqrt(2 / math.pi) * (x + 0.044715 * x**3)))


def test_two_node_graph_matches_hand_computation():
    with default_dtype(np.float64):
        layer = GNNLayer(np.random.default_rng(0), 2)
        layer.w_self.data[:] = [[1.0, 0.0], [0.0, 2.0]]
        layer.w_in.data[:] = [[0.5, 0.0], [0.0, 0.0]]
        layer.w_out.data[:] = [[0.0, 0.0], [0.0, -1.0]]
        h = np.array([[1.0, 2.0], [3.0, -1.0]])
        out = layer(Tensor(h), np.array([0]), np.array([1])).data

        def ln(x):
            return (x - x.mean()) / np.sqrt(x.var() + 1e-5)

        # Node a (0) has one successor b; node b (1) has one predecessor a.
        m_a = h[0] @ layer.w_self.data + h[1] @ layer.w_out.data
        m_b = h[1] @ layer.w_self.data + h[0] @ layer.w_in.data
        np.testing.assert_allclose(out[0], h[0] + _gelu(ln(m_a)), rtol=1e-12)
        np.testing.assert_allclose(out[1], h[1] + _gelu(ln(m_b)), rtol=1e-12)


def test_one_dimensional_layer_reduces_to_beta():
    with default_dtype(np.float64):
        layer = GNNLayer(np.random.default_rng(0), 1)
        layer.w_self.data[:] = 2.0
        layer.w_in.data[:] = 3.0
        layer.w_out.data[:] = -1.0
        layer.norm.beta.data[:] = 0.25
        h = np.array([[1.0], [4.0]])
        out = layer(Tensor(h), np.array([0]), np.array([1])).data
        # A single feature normalizes to zero, leaving gelu(beta).
        np.testing.assert_allclose(out, h + _gelu(0.25), rtol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_gnn_layer_gradients(seed):
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        gnn = DirectedGNN(rng, 3, 4, 2)
        n = int(rng.integers(2, 6))
        edges = rng.integers(0, n, (int(rng.integers(1, 8)), 2))
        edges = edges[edges[:, 0] != edges[:, 1]]
        v = parameter(rng.standard_normal((n, 3)))
        w = rng.standard_normal((n, 4))
        params = [v, gnn.proj, gnn.layers[0].w_in, gnn.layers[1].w_out, gnn.layers[0].norm.gamma]
        assert check(lambda: (gnn(v, edges) * Tensor(w)).sum(), params) <= TOL


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        gnn = DirectedGNN(rng, 3, 5, 3)
        n = int(rng.integers(1, 9))
        v = rng.standard_normal((n, 3))
        edges = rng.integers(0, n, (int(rng.integers(0, 12)), 2))
        perm = rng.permutation(n)
        inv = np.argsort(perm)
        h = gnn(Tensor(v), edges).data
        hp = gnn(Tensor(v[perm]), inv[edges]).data
        np.testing.assert_allclose(hp, h[perm], rtol=1e-10, atol=1e-12)


def test_direction_sensitivity():
    rng = np.random.default_rng(5)
    gnn = DirectedGNN(rng, 3, 5, 2)
    v = Tensor(rng.standard_normal((4, 3)))
    edges = np.array([[0, 1], [1, 2], [2, 3]])
    assert not np.allclose(gnn(v, edges).data, gnn(v, edges[:, ::-1]).data)


def test_gnn_shape_errors():
    gnn = DirectedGNN(np.random.default_rng(0), 3, 5, 1)
    with pytest.raises(ShapeMismatch):
        gnn(Tensor(np.zeros((2, 4))), np.zeros((0, 2)))
    assert gnn(Tensor(np.zeros((7, 3))), np.array([[0, 6]])).shape == (7, 5)


# -- adapters -----------------------------------------------------------------------------

def test_cross_attention_single_node():
    rng = np.random.default_rng(0)
    ad = CrossAttnAdapter(rng, 6, 8, n_g=5)
    h = rng.standard_normal((1, 6))
    x, counts = ad(Tensor(h), [1])
    assert x.shape == (5, 8) and list(counts) == [5]
    expected = h @ ad.w_v.data @ ad.w_o.data
    np.testing.assert_allclose(x.data, np.repeat(expected, 5, axis=0), rtol=1e-5)


def test_cross_attention_invariant_to_duplicated_nodes():
    rng = np.random.default_rng(1)
    ad = CrossAttnAdapter(rng, 6, 8, n_g=3)
    h = rng.standard_normal((4, 6))
    a, _ = ad(Tensor(h), [4])
    b, _ = ad(Tensor(np.concatenate([h, h])), [8])
    np.testing.assert_allclose(a.data, b.data, rtol=1e-5, atol=1e-6)


def test_cross_attention_batch_matches_single_graphs():
    rng = np.random.default_rng(2)
    ad = CrossAttnAdapter(rng, 6, 8, n_g=3)
    h1, h2 = rng.standard_normal((2, 6)), rng.standard_normal((5, 6))
    both, counts = ad(Tensor(np.concatenate([h1, h2])), [2, 5])
    assert list(counts) == [3, 3]
    np.testing.assert_allclose(both.data[:3], ad(Tensor(h1), [2])[0].data, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(both.data[3:], ad(Tensor(h2), [5])[0].data, rtol=1e-5, atol=1e-6)


def test_cross_attention_rejects_empty_graph():
    ad = CrossAttnAdapter(np.random.default_rng(0), 6, 8, n_g=3)
    with pytest.raises(EmptyGraph):
        ad(Tensor(np.zeros((0, 6))), [0])


@pytest.mark.parametrize("seed", range(10))
def test_adapter_gradients(seed):
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        ca = CrossAttnAdapter(rng, 4, 5, n_g=3)
        mlp = MlpAdapter(rng, 4, 5, hidden=6)
        counts = [int(rng.integers(1, 4)), int(rng.integers(1, 4))]
        h = parameter(rng.standard_normal((sum(counts), 4)))
        w1 = rng.standard_normal((6, 5))
        w2 = rng.standard_normal((sum(counts), 5))
        assert check(lambda: (ca(h, counts)[0] * Tensor(w1)).sum(), [ca.queries, h, ca.w_k, ca.w_o]) <= TOL
        assert check(lambda: (mlp(h, counts)[0] * Tensor(w2)).sum(), [h, mlp.l1.w, mlp.l2.b, mlp.l3.w]) <= TOL


def test_mlp_adapter_is_rowwise():
    rng = np.random.default_rng(3)
    mlp = MlpAdapter(rng, 4, 5, hidden=6)
    h = rng.standard_normal((6, 4))
    perm = rng.permutation(6)
    out, counts = mlp(Tensor(h), [6])
    assert list(counts) == [6]
    np.testing.assert_allclose(mlp(Tensor(h[perm]), [6])[0].data, out.data[perm], rtol=1e-6)
    for p in mlp.parameters():
        p.data[:] = 0
    assert not mlp(Tensor(h), [6])[0].data.any()


def test_adapter_parameter_counts_within_ten_percent():
    rng = np.random.default_rng(0)
    ca, mlp = CrossAttnAdapter(rng), MlpAdapter(rng)
    assert abs(mlp.n_params() - ca.n_params()) <= 0.1 * ca.n_params()


# -- splice / LM -------------------------------------------------------------------------------

def test_graph_first_layout():
    lay = make_layout(16, list(range(4)), list(range(6)), "GraphFirst")
    assert len(lay) == 26
    assert not lay.loss_mask[:16].any() and lay.segment[:16].all()
    assert lay.loss_mask.tolist() == [0] * 20 + [1] * 6


def test_text_first_masks_only_answer():
    lay = make_layout(3, [7, 8], [9, 10, 11], "TextFirst", eot=1)
    assert lay.slots.tolist() == [7, 8, -1, -2, -3, 9, 10, 11, 1]
    assert lay.loss_mask.tolist() == [0, 0, 0, 0, 0, 1, 1, 1, 1]
    check_layout(lay)


def test_answer_before_graph_is_rejected():
    lay = make_layout(2, [5], [6, 7], "GraphFirst")
    lay.slots = np.array([-1, 5, 6, -2, 7])
    with pytest.raises(AnswerBeforeGraph):
        check_layout(lay)


def test_no_graph_input_is_text_embeddings():
    rng = np.random.default_rng(0)
    emb = parameter(rng.standard_normal((20, 4)))
    lay = make_layout(None, [3, 4], [5], "GraphFirst")
    batch = embed_layouts(emb, [lay])
    np.testing.assert_array_equal(batch.x.data[0], emb.data[[3, 4, 5]])


def _tiny_model(tokenizer, subtokens, seed=0, **kw):
    return GallaModel(tiny_config(**kw), tokenizer, subtokens, seed=seed)


def _example(model, prog, placement="GraphFirst", view="AST"):
    tok = model.tokenizer
    g = graph_from_source("p", prog)
    return Example(tok.encode("Write the code for this graph."), tok.encode(prog), placement,
                   graph_input(g, view, model.subtokens))


@pytest.mark.parametrize("seed", range(10))
def test_spliced_lm_loss_gradients(seed, tokenizer, subtokens, short_programs):
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        model = _tiny_model(tokenizer, subtokens, seed=seed, adapter=["cross_attn", "mlp"][seed % 2])
        for table in (model.lm.tok_emb, model.lm.pos_emb):
            table.data[...] = rng.standard_normal(table.data.shape)  # see test_acceptance
        exs = [_example(model, short_programs[int(rng.integers(len(short_programs)))], ["GraphFirst", "TextFirst"][k])
               for k in range(2)]
        blocks = model.lm.blocks
        params = [model.lm.tok_emb, blocks[0].wq.w, blocks[1].fc1.w, model.lm.head,
                  model.encoder.featurizer.sub_emb, model.encoder.gnn.layers[0].w_self]
        params += [model.adapter.queries] if seed % 2 == 0 else [model.adapter.l1.w]
        assert check(lambda: model.loss(exs), params, max_coords=12, rng=rng) <= TOL


def test_per_example_graph_zeroing(tokenizer, subtokens, short_programs):
    model = _tiny_model(tokenizer, subtokens)
    exs = [_example(model, p) for p in short_programs[:3]]
    full = model.splice(exs).x.data
    zeroed = model.splice(exs, zero_graph=True).x.data
    mixed = model.splice(exs, zero_graph=np.array([False, True, False])).x.data
    np.testing.assert_array_equal(mixed[[0, 2]], full[[0, 2]])
    np.testing.assert_array_equal(mixed[1], zeroed[1])
    assert not np.array_equal(full[1], zeroed[1])


def test_graph_tokens_receive_gradient_through_masked_loss(tokenizer, subtokens):
    with default_dtype(np.float64):
        lm = DecoderLM(np.random.default_rng(0), tokenizer.vocab_size, 8, 1, 2, 16)
        xg = parameter(np.random.default_rng(1).standard_normal((1, 8)))
        lay = make_layout(1, [], [5], "GraphFirst")
        assert lay.loss_mask.tolist() == [0, 1]

        def loss():
            b = embed_layouts(lm.tok_emb, [lay], xg, [1])
            return cross_entropy(lm.forward(b.x), b.targets, b.target_mask)

        assert check(loss, [xg]) <= TOL
        assert np.abs(xg.grad).max() > 0


def test_uniform_logits_loss_is_log_vocab():
    v = 37
    assert cross_entropy(Tensor(np.zeros((1, 5, v))), np.zeros((1, 5), int), np.ones((1, 5))).item() == \
        pytest.approx(math.log(v), rel=1e-6)


def test_mask_empty_from_lm_loss():
    with pytest.raises(MaskEmpty):
        cross_entropy(Tensor(np.zeros((1, 3, 4))), np.zeros((1, 3), int), np.zeros((1, 3)))


def test_masked_target_perturbation_leaves_loss_bit_identical(tokenizer, subtokens, short_programs):
    model = _tiny_model(tokenizer, subtokens)
    exs = [_example(model, short_programs[i], ["GraphFirst", "TextFirst"][i % 2]) for i in range(4)]
    batch = model.splice(exs)
    base = model.batch_loss(batch).data.tobytes()
    rng = np.random.default_rng(0)
    free = batch.target_mask == 0
    batch.targets[free] = rng.integers(0, tokenizer.vocab_size, int(free.sum()))
    assert model.batch_loss(batch).data.tobytes() == base


def test_causality(tokenizer):
    rng = np.random.default_rng(0)
    lm = DecoderLM(rng, tokenizer.vocab_size, 16, 2, 2, 32)
    x = rng.standard_normal((1, 10, 16)).astype(np.float32)
    base = lm.forward(Tensor(x)).data
    for i in range(9):
        y = x.copy()
        y[0, i + 1 :] += rng.standard_normal((9 - i, 16)).astype(np.float32)
        np.testing.assert_array_equal(lm.forward(Tensor(y)).data[0, : i + 1], base[0, : i + 1])


def test_generation_is_deterministic_and_stops(tokenizer, subtokens):
    model = _tiny_model(tokenizer, subtokens)
    ex = _example(model, "x = 1\n")
    a = model.generate([ex], max_new=7)
    b = model.generate([ex], max_new=7)
    assert a == b and len(a[0]) <= 7


def _naive_generate(model, ex, max_new):
    """Greedy decoding that recomputes the whole sequence at every step."""
    lay = model.layout(ex, with_answer=False)
    tokens, counts = (None, None)
    if ex.graph is not None:
        tokens, counts = model.graph_tokens([ex.graph])
    out = []
    for _ in range(max_new):
        cur = make_layout(None, [], [])
        cur.slots = np.concatenate([lay.slots, np.asarray(out, np.int64)])
        cur.loss_mask = np.zeros(len(cur.slots), np.int8)
        batch = embed_layouts(model.lm.tok_emb, [cur], tokens, counts)
        nxt = int(model.lm.forward(batch.x).data[0, -1].argmax())
        if nxt == model.tokenizer.eot_id:
            break
        out.append(nxt)
    return out


def test_cached_generation_matches_full_recompute(tokenizer, subtokens, short_programs):
    model = _tiny_model(tokenizer, subtokens, seed=3)
    exs = [_example(model, short_programs[i], ["GraphFirst", "TextFirst"][i % 2]) for i in range(3)]
    exs.append(Example(tokenizer.encode("x = 1"), [], "GraphFirst", None))
    cached = model.generate(exs, max_new=12)
    for ex, got in zip(exs, cached):
        assert got == _naive_generate(model, ex, 12)


def test_prefix_ending_in_eot_gives_empty_continuation(tokenizer, subtokens):
    model = _tiny_model(tokenizer, subtokens)
    eot = tokenizer.eot_id
    # Force EOT as the argmax everywhere.
    model.lm.head.data[:] = 0
    model.lm.head.data[:, eot] = 1
    model.lm.ln_f.beta.data[:] = 1
    model.lm.ln_f.gamma.data[:] = 0
    full = Example(tokenizer.encode("x = 1") + [eot], [], "GraphFirst", None)
    assert model.generate([full], max_new=5) == [[]]


def test_checkpoint_round_trip_and_graph_free_load(tmp_path, tokenizer, subtokens):
    model = _tiny_model(tokenizer, subtokens)
    model.save(tmp_path / "m.ckpt")
    full = GallaModel.load(tmp_path / "m.ckpt")
    assert full.checksum() == model.checksum()
    lm_only = GallaModel.load(tmp_path / "m.ckpt", with_graph=False)
    assert lm_only.encoder is None and lm_only.adapter is None
    assert lm_only.lm.checksum() == model.lm.checksum()


def test_overfit_single_sample_reproduces_answer(tokenizer, subtokens):
    from galla.tensor import AdamW

    model = _tiny_model(tokenizer, subtokens, seed=1)
    ex = _example(model, "x = a + 1\n", "TextFirst")
    opt = AdamW(model.parameters(), lr=3e-3, weight_decay=0.0, warmup_steps=1)
    for _ in range(150):
        opt.zero_grad()
        model.loss([ex]).backward()
        opt.step()
    assert model.generate([ex], max_new=len(ex.answer_ids) + 4) == [ex.answer_ids]
