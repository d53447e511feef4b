"""Character n-gram LM (Witten-Bell, interpolated backoff) and CTC prefix
beam search with LM fusion and a per-letter insertion bias."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ctc import BLANK, Alphabet

BOS = "<s>"
EOS = "</s>"


@dataclass
class CharNGramLM:
    order: int
    letters: tuple[str, ...]
    # context (tuple of symbols, length 0..order-1) -> next symbol -> count
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        self._totals = {ctx: sum(nxt.values()) for ctx, nxt in self.counts.items()}
        self._cache: dict = {}

    @property
    def vocab(self) -> tuple[str, ...]:
        """Predictable symbols: letters plus end-of-sequence."""
        return self.letters + (EOS,)

    def _context(self, prefix: Sequence[str]) -> tuple[str, ...]:
        k = self.order - 1
        if k == 0:
            return ()
        padded = (BOS,) * k + tuple(prefix)
        return padded[len(padded) - k:]

    def _prob(self, ctx: tuple[str, ...], sym: str) -> float:
        key = (ctx, sym)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if ctx:
            lower = self._prob(ctx[1:], sym)
        else:
            lower = 1.0 / len(self.vocab)
        seen = self.counts.get(ctx)
        if not seen:
            p = lower
        else:
            total = self._totals[ctx]
            types = len(seen)
            p = (seen.get(sym, 0) + types * lower) / (total + types)
        self._cache[key] = p
        return p

    def prob(self, prefix: Sequence[str], sym: str) -> float:
        if sym not in self.vocab:
            raise ValueError(f"{sym!r} is not a predictable symbol")
        return self._prob(self._context(prefix), sym)

    def logprob(self, prefix: Sequence[str], sym: str) -> float:
        return math.log(self.prob(prefix, sym))

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        head = f"#order={self.order}\talphabet={''.join(self.letters)}"
        rows = []
        for ctx, nxt in self.counts.items():
            for sym, c in nxt.items():
                rows.append((" ".join(ctx), sym, c))
        rows.sort()
        return head + "\n" + "".join(f"{c}\t{s}\t{n}\n" for c, s, n in rows)

    @classmethod
    def from_text(cls, text: str) -> "CharNGramLM":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#order="):
            raise ValueError("missing LM header line")
        fields = dict(part.split("=", 1) for part in lines[0][1:].split("\t"))
        counts: dict = defaultdict(dict)
        for line in lines[1:]:
            if not line:
                continue
            ctx, sym, n = line.split("\t")
            counts[tuple(ctx.split(" ")) if ctx else ()][sym] = int(n)
        return cls(int(fields["order"]), tuple(fields["alphabet"]), dict(counts))

    def save(self, path: str | Path) -> None:
        from .storage import atomic_write_text
        atomic_write_text(path, self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "CharNGramLM":
        return cls.from_text(Path(path).read_text())


def train_ngram(corpus: Iterable[str], order: int = 4, letters: Sequence[str] | None = None) -> CharNGramLM:
    """Count n-grams of every order up to ``order`` from ``corpus``."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("cannot train a language model on an empty corpus")
    if order < 1:
        raise ValueError("order must be >= 1")
    if letters is None:
        letters = sorted(set("".join(corpus)))
    letters = tuple(letters)
    counts: dict = defaultdict(lambda: defaultdict(int))
    k = order - 1
    for word in corpus:
        syms = (BOS,) * k + tuple(word) + (EOS,)
        for pos in range(k, len(syms)):
            for n in range(order):
                counts[syms[pos - n:pos]][syms[pos]] += 1
    return CharNGramLM(order, letters, {c: dict(v) for c, v in counts.items()})


def perplexity(lm: CharNGramLM, corpus: Iterable[str]) -> float:
    """exp of the mean per-symbol negative log likelihood, EOS included."""
    nll = 0.0
    n = 0
    for word in corpus:
        for i, sym in enumerate(tuple(word) + (EOS,)):
            nll -= lm.logprob(word[:i], sym)
            n += 1
    if n == 0:
        raise ValueError("empty evaluation corpus")
    return math.exp(nll / n)


@dataclass
class BeamHyp:
    prefix: tuple[int, ...]
    log_blank: float
    log_nonblank: float
    lm_score: float

    @property
    def log_ctc(self) -> float:
        return float(np.logaddexp(self.log_blank, self.log_nonblank))

    @property
    def score(self) -> float:
        return self.log_ctc + self.lm_score


def beam_decode(posteriors: np.ndarray, alphabet: Alphabet, lm: CharNGramLM | None = None,
                beam_width: int = 16, lm_weight: float = 0.4, insertion_bias: float = 0.0) -> str:
    """CTC prefix beam search.

    Extending a prefix by letter c adds ``lm_weight * log P_lm(c | prefix) +
    insertion_bias`` to its score; finished hypotheses also pay the weighted
    end-of-sequence probability.  Ties are broken by lexicographic prefix.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    with np.errstate(divide="ignore"):
        logp = np.log(np.asarray(posteriors, dtype=np.float64))
    T, K = logp.shape
    use_lm = lm is not None and lm_weight != 0.0
    letters = alphabet.letters

    ext_memo: dict = {}

    def extension(prefix: tuple[int, ...], c: int) -> float:
        key = (prefix, c)
        if key not in ext_memo:
            bonus = insertion_bias
            if use_lm:
                bonus += lm_weight * lm.logprob([letters[i - 1] for i in prefix], letters[c - 1])
            ext_memo[key] = bonus
        return ext_memo[key]

    beams = {(): BeamHyp((), 0.0, -math.inf, 0.0)}
    for t in range(T):
        row = logp[t]
        nxt: dict[tuple[int, ...], BeamHyp] = {}

        def get(prefix, lm_score):
            hyp = nxt.get(prefix)
            if hyp is None:
                hyp = nxt[prefix] = BeamHyp(prefix, -math.inf, -math.inf, lm_score)
            return hyp

        for hyp in beams.values():
            total = hyp.log_ctc
            stay = get(hyp.prefix, hyp.lm_score)
            stay.log_blank = np.logaddexp(stay.log_blank, total + row[BLANK])
            last = hyp.prefix[-1] if hyp.prefix else None
            for c in range(1, K):
                lp = row[c]
                if lp == -math.inf:
                    continue
                ext_prefix = hyp.prefix + (c,)
                ext = get(ext_prefix, hyp.lm_score + extension(hyp.prefix, c))
                if c == last:
                    stay.log_nonblank = np.logaddexp(stay.log_nonblank, hyp.log_nonblank + lp)
                    ext.log_nonblank = np.logaddexp(ext.log_nonblank, hyp.log_blank + lp)
                else:
                    ext.log_nonblank = np.logaddexp(ext.log_nonblank, total + lp)
        alive = [h for h in nxt.values() if h.log_ctc > -math.inf]
        alive.sort(key=lambda h: (-h.score, h.prefix))
        beams = {h.prefix: h for h in alive[:beam_width]}
        if not beams:
            return ""

    def final(h: BeamHyp) -> float:
        s = h.score
        if use_lm:
            s += lm_weight * lm.logprob([letters[i - 1] for i in h.prefix], EOS)
        return s

    best = min(beams.values(), key=lambda h: (-final(h), h.prefix))
    return alphabet.decode(best.prefix)
