"""Word-level vocabulary for the desk-scale backbone."""

from __future__ import annotations

from typing import Iterable, Sequence

PAD, BOS, EOS, UNK, MASK, SEP = "<pad>", "<s>", "</s>", "<unk>", "<mask>", "<sep>"
SPECIALS = (PAD, BOS, EOS, UNK, MASK, SEP)


class Vocab:
    """Word <-> id map; every word is a single piece, so pointer alignment is exact."""

    def __init__(self, words: Iterable[str] = ()):
        self.itos: list[str] = []
        self.stoi: dict[str, int] = {}
        for w in SPECIALS:
            self.add(w)
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        if word not in self.stoi:
            self.stoi[word] = len(self.itos)
            self.itos.append(word)
        return self.stoi[word]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, word: str) -> bool:
        return word in self.stoi

    def id(self, word: str) -> int:
        return self.stoi.get(word, self.stoi[UNK])

    def pieces(self, word: str) -> list[int]:
        return [self.id(word)]

    pad_id = property(lambda self: self.stoi[PAD])
    bos_id = property(lambda self: self.stoi[BOS])
    eos_id = property(lambda self: self.stoi[EOS])
    unk_id = property(lambda self: self.stoi[UNK])
    mask_id = property(lambda self: self.stoi[MASK])
    sep_id = property(lambda self: self.stoi[SEP])

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, words: Sequence[str]) -> "Vocab":
        v = cls()
        if list(words[: len(SPECIALS)]) != list(SPECIALS):
            raise ValueError("vocabulary list must start with the special tokens")
        for w in words[len(SPECIALS):]:
            v.add(w)
        return v

    @classmethod
    def build(cls, sentences, extra_words: Iterable[str] = ()) -> "Vocab":
        v = cls(extra_words)
        for s in sentences:
            for w in s.words:
                v.add(w)
        return v


class HFWordTokenizer:
    """Adapts a Hugging Face subword tokenizer to the ``pieces`` protocol."""

    def __init__(self, tokenizer):
        self.tok = tokenizer

    def pieces(self, word: str) -> list[int]:
        ids = self.tok(" " + word, add_special_tokens=False)["input_ids"]
        return ids or [self.tok.unk_token_id]

    def __len__(self) -> int:
        return len(self.tok)

    pad_id = property(lambda self: self.tok.pad_token_id)
    bos_id = property(lambda self: self.tok.bos_token_id)
    eos_id = property(lambda self: self.tok.eos_token_id)
    unk_id = property(lambda self: self.tok.unk_token_id)
    mask_id = property(lambda self: self.tok.mask_token_id)
    # BART separates segments with </s></s>; one eos suffices as a boundary marker
    sep_id = property(lambda self: self.tok.eos_token_id)
