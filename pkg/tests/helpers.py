"""Shared builders and the finite-difference oracle used across test modules."""

from __future__ import annotations

import random

import torch

from promptabsa.core import Polarity, Span, SubtaskKind, Triplet, encode_targets
from promptabsa.model import ModelConfig, build_model
from promptabsa.prompting import PRESET_TEMPLATES, PromptConfig, build_prompt_batch
from promptabsa.synthetic import random_sentence, toy_corpus
from promptabsa.training.losses import generation_loss_from_logits, joint_loss, prompt_loss_from_logits
from promptabsa.training.trainer import build_vocab


def tiny_model(d=8, template="auto1", dtype=torch.float64, seed=0, sentences=None, backbone="tiny", layers=1):
    tpl = PRESET_TEMPLATES[template]
    vocab = build_vocab([sentences or toy_corpus()], tpl)
    torch.manual_seed(seed)
    cfg = ModelConfig(
        backbone=backbone, d_model=d, n_heads=2, encoder_layers=layers, decoder_layers=layers,
        ffn_dim=2 * d, template=tpl.to_dict(),
    )
    return build_model(cfg, vocab).to(dtype)


def joint_objective(model, sentences, seed=0, alpha1=1.0, alpha2=1.0):
    """Scalar joint loss over generation targets and a fixed set of prompt samples."""
    samples, owners = [], []
    for i, s in enumerate(sentences):
        for p in build_prompt_batch(s, random.Random(seed + i), PromptConfig(2, 0.5), model.template):
            samples.append(p)
            owners.append(s)
    targets = [list(encode_targets(s, SubtaskKind.TRIPLET).indices) for s in sentences]

    def f():
        logits, gold = model.generation_logits(sentences, targets)
        lg = generation_loss_from_logits(logits, gold)
        pl, labels = model.prompt_logits(owners, samples)
        lp = prompt_loss_from_logits(pl, labels)
        return joint_loss(lp, lg, alpha1, alpha2)

    return f


def central_difference_check(f, params, n_coords=12, step=1e-5, rtol=1e-3, floor=1e-6, seed=0):
    """Compare autograd gradients against central differences on sampled coordinates.

    Returns a list of ``(name, index, analytic, numeric, rel_err)`` for every
    coordinate checked; ``rel_err`` uses ``max(|a|, |n|, floor)`` as scale.
    """
    gen = torch.Generator().manual_seed(seed)
    for _, p in params:
        p.grad = None
    loss = f()
    loss.backward()
    rows = []
    for name, p in params:
        g = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        flat = g.flatten()
        nonzero = torch.nonzero(flat.abs() > 1e-9).flatten()
        pool = nonzero if len(nonzero) else torch.arange(flat.numel())
        pick = pool[torch.randperm(len(pool), generator=gen)[:n_coords]]
        for idx in pick.tolist():
            with torch.no_grad():
                orig = p.view(-1)[idx].item()
                p.view(-1)[idx] = orig + step
                up = f().item()
                p.view(-1)[idx] = orig - step
                down = f().item()
                p.view(-1)[idx] = orig
            num = (up - down) / (2 * step)
            ana = flat[idx].item()
            rel = abs(ana - num) / max(abs(ana), abs(num), floor)
            rows.append((name, idx, ana, num, rel))
    return rows


# tiny settings that overfit the toy corpus in a few seconds
SMOKE = dict(
    d_model=32, n_heads=2, encoder_layers=1, decoder_layers=1, ffn_dim=64,
    learning_rate=3e-3, batch_size=4, beam_size=1, warmup_ratio=0.05,
)


# ----------------------------------------------------------------- metrics oracle
def brute_scores(preds, golds, key):
    """Independent oracle: enumerate every predicted item and look it up by linear scan."""
    tp = npred = ngold = 0
    for p, g in zip(preds, golds):
        pk, gk = [], []
        for t in p:
            k = key(t)
            if k not in pk:
                pk.append(k)
        for t in g.triplets:
            k = key(t)
            if k not in gk:
                gk.append(k)
        npred += len(pk)
        ngold += len(gk)
        for k in pk:
            for j in gk:
                if k == j:
                    tp += 1
                    break
    p = tp / npred if npred else 0.0
    r = tp / ngold if ngold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


KEYS = {
    SubtaskKind.TRIPLET: lambda t: (t.aspect.start, t.aspect.end, t.opinion.start, t.opinion.end, t.polarity),
    SubtaskKind.PAIR: lambda t: (t.aspect.start, t.aspect.end, t.opinion.start, t.opinion.end),
    SubtaskKind.AESC: lambda t: (t.aspect.start, t.aspect.end, t.polarity),
}


def noisy_predictions(rng, gold):
    out = set()
    for t in gold.triplets:
        r = rng.random()
        if r < 0.5:
            out.add(t)
        elif r < 0.7:
            out.add(Triplet(t.aspect, t.opinion, rng.choice(list(Polarity))))
        elif r < 0.85:
            o = Span(t.opinion.start, min(gold.n, t.opinion.end + 1))
            out.add(Triplet(t.aspect, o, t.polarity))
    for _ in range(rng.randint(0, 2)):
        a = rng.randint(1, gold.n)
        o = rng.randint(1, gold.n)
        out.add(Triplet(Span(a, a), Span(o, o), rng.choice(list(Polarity))))
    return out


def random_corpus(rng, size=None):
    golds = [random_sentence(rng, max_n=12, max_triplets=4) for _ in range(size or rng.randint(1, 12))]
    return [noisy_predictions(rng, g) for g in golds], golds


# ----------------------------------------------------------------- acceptance verdicts
VERDICTS: list[str] = []


def verdict(number, title, ok, detail=""):
    tag = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{tag}] AC{number} {title}" + (f": {detail}" if detail else "")
    VERDICTS.append(line)
    print(line)
    return ok
