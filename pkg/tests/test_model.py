import math

import numpy as np
import pytest
import torch

from helpers import central_difference_check, joint_objective, tiny_model
from promptabsa.core import CLASS_LIST, Polarity, Span
from promptabsa.errors import AssemblyError, ShapeError
from promptabsa.model import (
    MlmHead,
    PromptEncoder,
    index_to_token,
    load_checkpoint,
    mask_label_distribution,
    pointer_distribution,
    prompt_encoder_forward,
    save_checkpoint,
)
from promptabsa.prompting import PRESET_TEMPLATES, PromptSample, LabelWord, Slot, render_prompt
from promptabsa.synthetic import toy_corpus

SUSHI_SENT = toy_corpus()[0]  # Good Sushi High Price .


# ----------------------------------------------------------------- prompt encoder
def test_prompt_encoder_shape_and_determinism():
    torch.manual_seed(0)
    enc = PromptEncoder(3, 8)
    out = prompt_encoder_forward([0, 1, 2], enc)
    assert out.shape == (3, 8)
    assert torch.equal(out, prompt_encoder_forward([0, 1, 2], enc))


def test_prompt_encoder_rejects_empty():
    with pytest.raises(ValueError):
        PromptEncoder(0, 8)
    enc = PromptEncoder(2, 8)
    with pytest.raises(ValueError):
        enc(torch.tensor([], dtype=torch.long))


def test_prompt_encoder_directional_context():
    # forward half at position k must not see h_k..h_lP; backward half must not see h_1..h_{k-1}
    torch.manual_seed(1)
    enc = PromptEncoder(4, 6).double()
    h = enc.embedding.weight
    base_f = enc.forward_lstm(torch.cat([torch.zeros_like(h[:1]), h[:-1]]).unsqueeze(0))[0][0]
    with torch.no_grad():
        h[3] += 1.0
    new_f = enc.forward_lstm(torch.cat([torch.zeros_like(h[:1]), h[:-1]]).unsqueeze(0))[0][0]
    assert torch.allclose(base_f[:4], new_f[:4])  # position 4 reads only up to h_3


def test_prompt_encoder_finite_difference():
    torch.manual_seed(2)
    enc = PromptEncoder(3, 8).double()
    readout = torch.randn(3, 8, dtype=torch.float64)

    def f():
        return (enc() * readout).sum()

    rows = central_difference_check(f, [("e_p", enc.embedding.weight)], n_coords=24)
    assert max(r[4] for r in rows) < 1e-3


# ----------------------------------------------------------------- heads
def test_mask_label_uniform_when_rows_equal():
    w = torch.ones(5, 4)
    p = mask_label_distribution(torch.randn(3, 4), 1, w)
    assert torch.allclose(p, torch.full((5,), 0.2))


def test_mask_label_hand_softmax():
    w = torch.tensor([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], dtype=torch.float64)
    h = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    p = mask_label_distribution(h, 0, w)
    e = math.e
    assert np.allclose(p.numpy(), [e / (e + 4)] + [1 / (e + 4)] * 4)
    assert np.allclose(p.numpy(), [0.405, 0.149, 0.149, 0.149, 0.149], atol=5e-4)


def test_mask_label_accepts_head():
    head = MlmHead(4)
    p = mask_label_distribution(torch.randn(2, 4), 0, head)
    assert abs(float(p.detach().sum()) - 1) < 1e-6


def test_index_to_token():
    words = ["Good", "Sushi", "High", "Price"]
    assert index_to_token(2, words) == "Sushi"
    assert index_to_token(5, words, CLASS_LIST) is Polarity.POS
    assert index_to_token(7, words) is Polarity.NEU
    with pytest.raises(IndexError):
        index_to_token(8, words)
    with pytest.raises(IndexError):
        index_to_token(0, words)


def test_pointer_identity_blend():
    H = torch.randn(3, 4, dtype=torch.float64)
    C = torch.randn(2, 4, dtype=torch.float64)
    h = torch.randn(4, dtype=torch.float64)
    p = pointer_distribution(H, H, C, h, 0.5)
    expected = torch.softmax(torch.cat([H, C]) @ h, 0)
    assert torch.allclose(p, expected)


def test_pointer_hand_softmax():
    H = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    C = torch.tensor([[1.0, 1.0]], dtype=torch.float64)
    p = pointer_distribution(H, H, C, torch.tensor([1.0, 0.0], dtype=torch.float64), 0.5)
    e = math.e
    assert np.allclose(p.numpy(), [e / (2 * e + 1), 1 / (2 * e + 1), e / (2 * e + 1)])
    assert np.allclose(p.numpy(), [0.4223, 0.1554, 0.4223], atol=5e-5)


def test_pointer_shape_errors():
    with pytest.raises(ShapeError):
        pointer_distribution(torch.randn(3, 4), torch.randn(3, 5), torch.randn(3, 4), torch.randn(4), 0.5)
    with pytest.raises(ShapeError):
        pointer_distribution(torch.randn(3, 4), torch.randn(3, 4), torch.randn(3, 5), torch.randn(4), 0.5)
    with pytest.raises(ValueError):
        pointer_distribution(torch.randn(3, 4), torch.randn(3, 4), torch.randn(3, 4), torch.randn(4), 1.5)


def test_pointer_random_valid():
    gen = torch.Generator().manual_seed(0)
    for _ in range(200):
        n = int(torch.randint(1, 13, (1,), generator=gen))
        d = int(torch.randint(1, 9, (1,), generator=gen))
        mlp = torch.nn.Linear(d, d)
        p = pointer_distribution(
            torch.randn(n, d, generator=gen), torch.randn(n, d, generator=gen),
            torch.randn(3, d, generator=gen), torch.randn(d, generator=gen), float(torch.rand(1, generator=gen)), mlp,
        )
        assert p.shape == (n + 3,) and bool((p >= 0).all()) and abs(float(p.detach().sum()) - 1) < 1e-6


# ----------------------------------------------------------------- assembly
def test_assemble_splices_prompt_rows():
    model = tiny_model(template="auto1")
    s = SUSHI_SENT
    layout = (Slot("pseudo", 1), Slot("aspect", ("Sushi",)), Slot("pseudo", 2), Slot("opinion", ("High",)), Slot("mask"))
    sample = PromptSample(layout, Span(2, 2), Span(3, 3), LabelWord.NO)
    h_prime = torch.randn(2, 8, dtype=torch.float64)
    embeds, masks, pseudo = model.assemble_prompt_input(s, sample, h_prime)
    prefix = 1 + s.n + 1  # <s> words <sep>
    assert embeds.shape[0] == prefix + 5 + 1
    assert pseudo == [prefix, prefix + 2]
    assert torch.equal(embeds[prefix], h_prime[0]) and torch.equal(embeds[prefix + 2], h_prime[1])
    ids, _, _ = model.prompt_layout_ids(s, sample)
    backbone_rows = [i for i in range(len(ids)) if i not in pseudo]
    assert len(backbone_rows) - prefix - 1 == 3
    tok = model.backbone.embed(torch.tensor(ids))
    for i in backbone_rows:
        assert torch.equal(embeds[i], tok[i])
    assert masks == [prefix + 4]


def test_assemble_mask_counts():
    model = tiny_model(template="auto1")
    s = SUSHI_SENT
    h_prime = model.prompt_encoder()
    yes = render_prompt(s, Span(2, 2), Span(1, 1), True, Polarity.POS, model.template)
    no = render_prompt(s, Span(2, 2), Span(3, 3), False, None, model.template)
    assert len(model.assemble_prompt_input(s, yes, h_prime)[1]) == 2
    assert len(model.assemble_prompt_input(s, no, h_prime)[1]) == 1


def test_assemble_length_mismatch():
    model = tiny_model(template="auto1")
    sample = render_prompt(SUSHI_SENT, Span(2, 2), Span(1, 1), True, Polarity.POS, PRESET_TEMPLATES["auto3"])
    with pytest.raises(AssemblyError):
        model.assemble_prompt_input(SUSHI_SENT, sample, model.prompt_encoder())


def test_prompt_logits_shape():
    model = tiny_model(template="auto2")
    s = SUSHI_SENT
    samples = [
        render_prompt(s, Span(2, 2), Span(1, 1), True, Polarity.POS, model.template),
        render_prompt(s, Span(2, 2), Span(3, 3), False, None, model.template),
    ]
    logits, labels = model.prompt_logits([s, s], samples)
    assert logits.shape == (3, 5)
    assert labels.tolist() == [0, 2, 1]


# ----------------------------------------------------------------- generation
def test_generation_step_first_step():
    model = tiny_model()
    p = model.generation_step(SUSHI_SENT, [])
    assert p.shape == (SUSHI_SENT.n + 3 + 1,)
    assert abs(float(p.detach().sum()) - 1) < 1e-12


def test_generation_causality():
    model = tiny_model()
    model.eval()
    s = SUSHI_SENT
    prefix = [2, 2, 1, 1, 6 + 0]
    state = model.encode([s])
    full = model.decode_logits(state, [prefix])[0].log_softmax(-1)
    for t in range(len(prefix) + 1):
        step = model.generation_step(s, prefix[:t]).log()
        assert torch.allclose(step, full[t], atol=1e-12)


def test_generation_step_reproducible_across_builds():
    p1 = tiny_model(seed=5).generation_step(SUSHI_SENT, [2, 2])
    p2 = tiny_model(seed=5).generation_step(SUSHI_SENT, [2, 2])
    assert p1.detach().numpy().tobytes() == p2.detach().numpy().tobytes()


def test_batched_generation_matches_single():
    model = tiny_model()
    sents = toy_corpus()[:3]
    targets = [[1], [2, 2, 4, 5, 7], []]
    logits, gold = model.generation_logits(sents, targets)
    for b, s in enumerate(sents):
        single, _ = model.generation_logits([s], [targets[b]])
        n = s.n
        a = logits[b, : len(targets[b]) + 1].log_softmax(-1)
        c = single[0].log_softmax(-1)
        # batch columns: words up to n_max then classes/end
        cols = list(range(n)) + list(range(logits.shape[-1] - 4, logits.shape[-1]))
        assert torch.allclose(a[:, cols], c, atol=1e-10)


def test_gradients_every_group():
    model = tiny_model(template="auto1")
    model.train()
    f = joint_objective(model, toy_corpus()[:3])
    groups = {
        "prompt_encoder": [(n, p) for n, p in model.named_parameters() if n.startswith("prompt_encoder")],
        "pointer_head": [(n, p) for n, p in model.named_parameters() if n.startswith("pointer_head")],
        "mlm_head": [(n, p) for n, p in model.named_parameters() if n.startswith("mlm_head")],
        "backbone": [(n, p) for n, p in model.named_parameters() if n.startswith("backbone")][:6],
    }
    for name, params in groups.items():
        rows = central_difference_check(f, params, n_coords=3)
        worst = max(r[4] for r in rows)
        assert worst < 1e-3, (name, worst)


# ----------------------------------------------------------------- checkpoint
def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = tiny_model()
    save_checkpoint(tmp_path / "ck", model, {"seed": 1})
    back, cfg = load_checkpoint(tmp_path / "ck")
    assert cfg == {"seed": 1}
    a, b = model.state_dict(), back.state_dict()
    assert a.keys() == b.keys()
    for k in a:
        assert a[k].dtype == b[k].dtype and torch.equal(a[k], b[k])


# ----------------------------------------------------------------- BART adapter
def test_bart_adapter_tiny_config():
    pytest.importorskip("transformers")
    model = tiny_model(backbone="bart", d=16)
    model.eval()
    s = SUSHI_SENT
    p = model.generation_step(s, [2, 2])
    assert p.shape == (s.n + 4,) and abs(float(p.detach().sum()) - 1) < 1e-10
    full = model.decode_logits(model.encode([s]), [[2, 2, 1]])[0].log_softmax(-1)
    assert torch.allclose(full[2], p.log(), atol=1e-10)
    sample = render_prompt(s, Span(2, 2), Span(1, 1), True, Polarity.POS, model.template)
    logits, labels = model.prompt_logits([s], [sample])
    assert logits.shape == (2, 5)


def test_bart_checkpoint_round_trip(tmp_path):
    pytest.importorskip("transformers")
    model = tiny_model(backbone="bart", d=16)
    save_checkpoint(tmp_path / "ck", model)
    back, _ = load_checkpoint(tmp_path / "ck")
    for k, v in model.state_dict().items():
        assert torch.equal(v, back.state_dict()[k])

