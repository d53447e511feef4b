"""CTC loss, gradient, collapsing and decoding over a blank-at-index-0 alphabet.

Label sequences are tuples of integer indices; index 0 is the blank and
letters occupy 1..|L|.  ``Alphabet`` converts between letters and indices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

BLANK = 0


class UnalignableError(ValueError):
    """No frame labeling of the given length collapses to the target."""


@dataclass(frozen=True)
class Alphabet:
    letters: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.letters)) != len(self.letters):
            raise ValueError("alphabet letters must be distinct")
        if any(len(c) != 1 for c in self.letters):
            raise ValueError("alphabet letters must be single characters")

    @classmethod
    def from_string(cls, letters: str) -> "Alphabet":
        return cls(tuple(letters))

    @property
    def size(self) -> int:
        """Number of output labels including the blank."""
        return len(self.letters) + 1

    def encode(self, word: str) -> tuple[int, ...]:
        try:
            return tuple(self.letters.index(c) + 1 for c in word)
        except ValueError:
            bad = [c for c in word if c not in self.letters]
            raise ValueError(f"symbols {bad!r} are not in the alphabet") from None

    def decode(self, labels: Sequence[int]) -> str:
        return "".join(self.letters[i - 1] for i in labels)

    def __str__(self) -> str:
        return "".join(self.letters)


def collapse(path: Sequence[int], blank: int = BLANK) -> tuple[int, ...]:
    """Merge adjacent duplicates, then drop blanks."""
    out = []
    prev = None
    for p in path:
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return tuple(out)


def min_frames(target: Sequence[int]) -> int:
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def _extended(target: Sequence[int]) -> np.ndarray:
    ext = np.zeros(2 * len(target) + 1, dtype=np.intp)
    ext[1::2] = target
    return ext


def _skip_allowed(ext: np.ndarray) -> np.ndarray:
    allowed = np.zeros(len(ext), dtype=bool)
    allowed[2:] = (ext[2:] != BLANK) & (ext[2:] != ext[:-2])
    return allowed


def _forward(logp: np.ndarray, ext: np.ndarray, skip: np.ndarray) -> np.ndarray:
    T = logp.shape[0]
    S = len(ext)
    alpha = np.full((T, S), -np.inf)
    alpha[0, 0] = logp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + logp[t, ext]
    return alpha


def _backward(logp: np.ndarray, ext: np.ndarray, skip: np.ndarray) -> np.ndarray:
    T = logp.shape[0]
    S = len(ext)
    beta = np.full((T, S), -np.inf)
    beta[T - 1, S - 1] = logp[T - 1, ext[S - 1]]
    if S > 1:
        beta[T - 1, S - 2] = logp[T - 1, ext[S - 2]]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        # a skip from s to s+2 is legal when s+2 is allowed to skip
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc + logp[t, ext]
    return beta


def _log_likelihood(alpha: np.ndarray) -> float:
    last = alpha[-1]
    if len(last) == 1:
        return float(last[-1])
    return float(np.logaddexp(last[-1], last[-2]))


def ctc_loss(posteriors: np.ndarray, target: Sequence[int]) -> float:
    """Negative log probability of ``target``; ``inf`` if it cannot be aligned."""
    posteriors = np.asarray(posteriors, dtype=np.float64)
    target = tuple(target)
    if min_frames(target) > posteriors.shape[0]:
        return math.inf
    ext = _extended(target)
    alpha = _forward(_log(posteriors), ext, _skip_allowed(ext))
    return -_log_likelihood(alpha)


def ctc_loss_and_grad(posteriors: np.ndarray, target: Sequence[int]) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the pre-softmax logits.

    Raises ``UnalignableError`` when no labeling collapses to ``target``.
    """
    posteriors = np.asarray(posteriors, dtype=np.float64)
    target = tuple(target)
    if min_frames(target) > posteriors.shape[0]:
        raise UnalignableError(
            f"target of length {len(target)} needs {min_frames(target)} frames, got {posteriors.shape[0]}")
    logp = _log(posteriors)
    ext = _extended(target)
    skip = _skip_allowed(ext)
    alpha = _forward(logp, ext, skip)
    beta = _backward(logp, ext, skip)
    log_like = _log_likelihood(alpha)
    if not np.isfinite(log_like):
        raise UnalignableError("target has zero probability under the posteriors")
    # alpha*beta double counts the emission at (t, s)
    occupancy = np.exp(alpha + beta - logp[:, ext] - log_like)
    occupancy[~np.isfinite(occupancy)] = 0.0
    gamma = np.zeros_like(posteriors)
    for s, label in enumerate(ext):
        gamma[:, label] += occupancy[:, s]
    return -log_like, posteriors - gamma


def ctc_grad(posteriors: np.ndarray, target: Sequence[int]) -> np.ndarray:
    return ctc_loss_and_grad(posteriors, target)[1]


def greedy_decode(posteriors: np.ndarray) -> tuple[int, ...]:
    # np.argmax returns the first maximum, i.e. ties go to the lower index
    return collapse(np.argmax(np.asarray(posteriors), axis=1).tolist())


def brute_force_nll(posteriors: np.ndarray, target: Sequence[int],
                    max_paths: int = 10 ** 6) -> float:
    """Reference loss by enumerating every frame labeling."""
    posteriors = np.asarray(posteriors, dtype=np.float64)
    T, K = posteriors.shape
    if K ** T > max_paths:
        raise ValueError(f"{K}^{T} labelings exceeds the enumeration limit {max_paths}")
    target = tuple(target)
    total = 0.0
    for path in itertools.product(range(K), repeat=T):
        if collapse(path) == target:
            total += math.prod(posteriors[t, k] for t, k in enumerate(path))
    if total == 0.0:
        return math.inf
    return -math.log(total)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)
