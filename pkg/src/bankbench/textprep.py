"""Deterministic text preprocessing for report narratives.

The pipeline is intentionally rule-based and dependency-free so that the
same input text always yields the same token stream, on any machine:

1. lowercase and split on any non-alphanumeric run,
2. drop single characters, stopwords, and purely numeric tokens,
3. lemmatise each remaining token (exception lookup + suffix rules,
   iterated to a fixed point),
4. drop lemmas that became stopwords, single characters, or numbers.

Step 4 closes the pipeline under repetition: ``preprocess`` applied to its
own (re-joined) output is the identity.

The lemmatiser is close to a WordNet-style noun/verb lemmatiser for the
vocabulary that matters in financial filings.  Irregular forms come from
a bundled lookup table; regular inflection is handled by suffix rules
with spelling repair (consonant undoubling, final-e restoration).
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import re
from collections import Counter
from functools import lru_cache
from typing import Iterable

__all__ = [
    "MISSING_TOKEN",
    "UNK_TOKEN",
    "Vocabulary",
    "tokenize",
    "lemmatize",
    "preprocess",
    "build_vocab",
    "apply_vocab",
    "stopwords",
]

MISSING_TOKEN = "missing"
UNK_TOKEN = "_UNK_"

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")
_VOWELS = frozenset("aeiou")


def _data_text(name: str) -> str:
    return (
        importlib.resources.files("bankbench")
        .joinpath("data")
        .joinpath(name)
        .read_text(encoding="utf-8")
    )


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The bundled 179-word English stopword list."""
    words = [w.strip() for w in _data_text("stopwords.txt").splitlines()]
    return frozenset(w for w in words if w)


@lru_cache(maxsize=1)
def _exceptions() -> dict[str, str]:
    table = {}
    for line in _data_text("lemma_exceptions.tsv").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        form, lemma = line.split("\t")
        table[form] = lemma
    return table


@lru_cache(maxsize=1)
def _stem_fixes() -> dict[str, str]:
    table = {}
    for line in _data_text("stem_fixes.tsv").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        stem, lemma = line.split("\t")
        table[stem] = lemma
    return table


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop single characters."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) >= 2]


def _has_vowel(word: str) -> bool:
    return any(c in _VOWELS for c in word)


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        # y is a consonant at the start or after a vowel ("yes", "payer"),
        # a vowel after a consonant ("try")
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(word: str) -> int:
    """Number of vowel-to-consonant transitions (the Porter measure)."""
    m = 0
    prev_vowel = False
    for i in range(len(word)):
        vowel = not _is_consonant(word, i)
        if prev_vowel and not vowel:
            m += 1
        prev_vowel = vowel
    return m


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _repair(stem: str) -> str:
    """Spelling repair after stripping -ed / -ing."""
    fixed = _stem_fixes().get(stem)
    if fixed is not None:
        return fixed
    if stem.endswith(("at", "bl", "iz")):
        return stem + "e"
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] in "bdgmnprt":
        return stem[:-1]
    # English words do not end in these letters; the stripped form lost an e
    if stem.endswith(("c", "u", "v")) or (stem.endswith("z") and not stem.endswith("zz")):
        return stem + "e"
    if _measure(stem) == 1 and _ends_cvc(stem):
        return stem + "e"
    return stem


def _lemma_step(word: str) -> str:
    exception = _exceptions().get(word)
    if exception is not None:
        return exception
    n = len(word)
    # plurals and third-person -s
    if word.endswith("ies") and n >= 5:
        return word[:-3] + "y"
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith(("ches", "shes", "xes", "zes")):
        return word[:-2]
    if word.endswith("s") and n >= 4 and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    # past tense; -eed words (need, proceed, ...) are bases, not pasts
    if word.endswith("ied") and n >= 5:
        return word[:-3] + "y"
    if word.endswith("ed") and not word.endswith("eed") and n >= 4 and _has_vowel(word[:-2]):
        return _repair(word[:-2])
    # progressive
    if word.endswith("ing") and n >= 5 and _has_vowel(word[:-3]):
        return _repair(word[:-3])
    return word


@lru_cache(maxsize=1_000_000)
def lemmatize(token: str) -> str:
    """Reduce a token to its root form, iterating rules to a fixed point.

    Cached per token: corpora repeat a modest vocabulary millions of
    times, so the fixed-point loop runs once per distinct form.
    """
    seen = set()
    while token not in seen:
        seen.add(token)
        token = _lemma_step(token)
    return token


def preprocess(text: str) -> list[str]:
    """Full pipeline: tokenize, filter, lemmatise, filter again.

    Idempotent: preprocessing the space-joined output returns it unchanged.
    """
    sw = stopwords()
    out = []
    for tok in tokenize(text):
        if tok in sw or tok.isdigit():
            continue
        lemma = lemmatize(tok)
        if len(lemma) < 2 or lemma in sw or lemma.isdigit():
            continue
        out.append(lemma)
    return out


@dataclasses.dataclass
class Vocabulary:
    """Token-to-id mapping, frequency-ranked, with reserved specials.

    Ids follow rank order (most frequent first, ties broken
    lexicographically); the unknown-word and missing-report sentinels are
    appended after the capped ranking if not already present.
    """

    tokens: list[str]
    freqs: list[int]
    max_size: int

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.freqs):
            raise ValueError("tokens and freqs must align")
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if UNK_TOKEN not in self._ids or MISSING_TOKEN not in self._ids:
            raise ValueError("vocabulary must contain the reserved specials")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def unk_id(self) -> int:
        return self._ids[UNK_TOKEN]

    @property
    def missing_id(self) -> int:
        return self._ids[MISSING_TOKEN]

    def id_for(self, token: str) -> int:
        """Id of the token, falling back to the unknown-word id."""
        return self._ids.get(token, self._ids[UNK_TOKEN])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                f"# max_size={self.max_size}\tspecials={UNK_TOKEN},{MISSING_TOKEN}\n"
            )
            for token, freq in zip(self.tokens, self.freqs):
                fh.write(f"{token}\t{freq}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens: list[str] = []
        freqs: list[int] = []
        max_size = None
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    for part in line[1:].split("\t"):
                        part = part.strip()
                        if part.startswith("max_size="):
                            max_size = int(part.removeprefix("max_size="))
                    continue
                try:
                    token, freq = line.split("\t")
                except ValueError as exc:
                    raise ValueError(f"{path}: malformed line {lineno}: {line!r}") from exc
                tokens.append(token)
                freqs.append(int(freq))
        if max_size is None:
            raise ValueError(f"{path}: missing max_size header")
        return cls(tokens=tokens, freqs=freqs, max_size=max_size)


def build_vocab(docs: Iterable[list[str]], max_size: int = 50_000) -> Vocabulary:
    """Frequency-ranked vocabulary over preprocessed documents.

    At most ``max_size`` ranked tokens are kept (ties at the cut broken
    lexicographically), then the specials are appended if absent, so the
    total size is at most ``max_size + 2``.
    """
    if max_size <= 0:
        raise ValueError("max_size must be positive")
    counts: Counter[str] = Counter()
    for doc in docs:
        counts.update(doc)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size]
    tokens = [t for t, _ in ranked]
    freqs = [c for _, c in ranked]
    present = set(tokens)
    for special in (UNK_TOKEN, MISSING_TOKEN):
        if special not in present:
            tokens.append(special)
            freqs.append(counts.get(special, 0))
    return Vocabulary(tokens=tokens, freqs=freqs, max_size=max_size)


def apply_vocab(doc: list[str], vocab: Vocabulary) -> list[str]:
    """Replace out-of-vocabulary tokens by the unknown-word sentinel."""
    return [tok if tok in vocab else UNK_TOKEN for tok in doc]
