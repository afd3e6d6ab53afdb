"""Utterance featurization: tokens, count vectors, textual and speech-act
features, and ingestion of precomputed external sentence embeddings.

All featurizers are pure after construction. Anything fitted (count
vocabulary, top-word list) is built from training text only and frozen.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tensor import Tensor

_TOKEN_RE = re.compile(r"[^\s?!.,']+|[?!.,']")

WH_WORDS = frozenset("what who where when why which how whose whom".split())
FIRST_PERSON = frozenset("i me my mine we us our ours".split())
SECOND_PERSON = frozenset("you your yours yourself".split())
THIRD_PERSON = frozenset("he she it they him her them his hers its their theirs".split())
AUX_VERBS = frozenset(
    "is are am was were do does did can could will would should shall may might have has had".split()
)
NEGATION_CUES = frozenset("not no never none dont cant wont didnt isnt aint ain".split())
# Verbs that plausibly open a command; used by the imperative heuristic.
IMPERATIVE_VERBS = frozenset(
    """touch put raise lower clap stand sit jump turn shake wave nod close open stop go
    tell say give show play do come look listen hold point stomp blink wiggle spin hop
    pat rub snap tap cross cover lift bend march flap pretend repeat try wait start""".split()
)
ACK_WORDS = frozenset("okay ok yes yeah yep sure alright right fine thanks cool".split())
FEELING_VERBS = frozenset("feel feels felt think thinks mean means sound sounds seem seems".split())
CONFIRM_WORDS = frozenset("right correct exactly indeed true".split())

SPEECH_ACT_CLASSES = (
    "question",
    "disclosure",  # edification folded in
    "advisement",
    "acknowledgement",
    "reflection",
    "interpretation",
    "confirmation",
)


class ConfigError(ValueError):
    """Raised for invalid featurizer configuration."""


class EmbeddingFormatError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class TokenizedUtterance:
    raw: str
    tokens: tuple[str, ...]
    char_spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class FeatureVector:
    """Dense vector plus a record of which family produced which span."""

    dense: Tensor
    provenance: tuple[tuple[str, int, int], ...]

    @property
    def dim(self) -> int:
        return int(self.dense.data.shape[0])

    def family_slice(self, name: str) -> np.ndarray:
        for fam, off, width in self.provenance:
            if fam == name:
                return self.dense.data[off:off + width]
        raise KeyError(name)


def _vector(name: str, values: np.ndarray) -> FeatureVector:
    arr = np.asarray(values, dtype=np.float64)
    return FeatureVector(Tensor(arr), ((name, 0, arr.shape[0]),))


def concat_features(parts: Sequence[FeatureVector]) -> FeatureVector:
    """Concatenate feature vectors, rebasing provenance offsets."""
    datas = [p.dense.data for p in parts]
    prov: list[tuple[str, int, int]] = []
    off = 0
    for p in parts:
        for fam, o, w in p.provenance:
            prov.append((fam, off + o, w))
        off += p.dim
    return FeatureVector(Tensor(np.concatenate(datas) if datas else np.zeros(0)), tuple(prov))


def tokenize(raw: str) -> TokenizedUtterance:
    """Lowercase and split on whitespace; ? ! . , ' become standalone tokens."""
    tokens = []
    spans = []
    for m in _TOKEN_RE.finditer(raw):
        tokens.append(m.group(0).lower())
        spans.append((m.start(), m.end()))
    return TokenizedUtterance(raw=raw, tokens=tuple(tokens), char_spans=tuple(spans))


def stable_bucket(token: str, buckets: int) -> int:
    """Process-independent hash bucket (crc32, not Python's salted hash)."""
    return zlib.crc32(token.encode("utf-8")) % buckets


# ---------------------------------------------------------------------------
# count features
# ---------------------------------------------------------------------------


class CountVocab:
    """Frozen unigram + bigram index with a single trailing OOV slot.

    Unknown unigrams all count into the OOV slot; unknown bigrams are
    dropped (their tokens already hit the unigram side).
    """

    def __init__(self, unigrams: Iterable[str], bigrams: Iterable[tuple[str, str]]):
        self.unigrams = tuple(sorted(set(unigrams)))
        self.bigrams = tuple(sorted(set(bigrams)))
        self._uni_index = {t: i for i, t in enumerate(self.unigrams)}
        self._bi_index = {b: i for i, b in enumerate(self.bigrams)}

    @classmethod
    def fit(cls, utterances: Iterable[TokenizedUtterance]) -> "CountVocab":
        unis: set[str] = set()
        bis: set[tuple[str, str]] = set()
        for u in utterances:
            unis.update(u.tokens)
            bis.update(zip(u.tokens, u.tokens[1:]))
        return cls(unis, bis)

    @property
    def dim(self) -> int:
        return len(self.unigrams) + len(self.bigrams) + 1

    @property
    def token_dim(self) -> int:
        # Per-token one-hot width for the sequence path.
        return len(self.unigrams) + 1

    @property
    def oov_slot(self) -> int:
        return len(self.unigrams) + len(self.bigrams)

    def counts(self, u: TokenizedUtterance) -> np.ndarray:
        v = np.zeros(self.dim)
        nb = len(self.unigrams)
        for tok in u.tokens:
            i = self._uni_index.get(tok)
            if i is None:
                v[self.oov_slot] += 1.0
            else:
                v[i] += 1.0
        for pair in zip(u.tokens, u.tokens[1:]):
            j = self._bi_index.get(pair)
            if j is not None:
                v[nb + j] += 1.0
        return v

    def token_onehot(self, token: str) -> np.ndarray:
        v = np.zeros(self.token_dim)
        v[self._uni_index.get(token, len(self.unigrams))] = 1.0
        return v

    def to_json(self) -> dict:
        return {"unigrams": list(self.unigrams),
                "bigrams": [list(b) for b in self.bigrams]}

    @classmethod
    def from_json(cls, doc: dict) -> "CountVocab":
        return cls(doc["unigrams"], [tuple(b) for b in doc["bigrams"]])


def count_vectorize(u: TokenizedUtterance, vocab: CountVocab) -> FeatureVector:
    return _vector("counts", vocab.counts(u))


# ---------------------------------------------------------------------------
# textual features
# ---------------------------------------------------------------------------


class TextualFeaturizer:
    """Registry of shallow text feature families.

    The full original inventory is not reproducible, so each named family
    (word count, first/last word identity, interrogativity markers,
    person pronouns, imperative shape, frequent-word indicators, length
    statistics) is implemented as one fixed-width block.
    """

    def __init__(self, top_words: Sequence[str] = (), hash_buckets: int = 24):
        if hash_buckets < 1:
            raise ConfigError("hash_buckets must be >= 1")
        self.top_words = tuple(sorted(set(top_words)))
        self.hash_buckets = hash_buckets
        self._families = (
            ("textual.word_count", 1, self._word_count),
            ("textual.first_word", hash_buckets, self._first_word),
            ("textual.last_word", hash_buckets, self._last_word),
            ("textual.wh", 2, self._wh),
            ("textual.punct", 2, self._punct),
            ("textual.person", 3, self._person),
            ("textual.imperative", 1, self._imperative),
            ("textual.inverted_aux", 1, self._inverted_aux),
            ("textual.negation", 1, self._negation),
            ("textual.top_words", max(1, len(self.top_words)), self._top_words),
            ("textual.length_stats", 3, self._length_stats),
            ("textual.count_bucket", 5, self._count_bucket),
        )

    @classmethod
    def fit_top_words(cls, utterances: Iterable[TokenizedUtterance], n: int = 48,
                      hash_buckets: int = 24) -> "TextualFeaturizer":
        freq: dict[str, int] = {}
        for u in utterances:
            for t in u.tokens:
                freq[t] = freq.get(t, 0) + 1
        # Frequency-desc, token-asc: deterministic under ties.
        ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(top_words=[t for t, _ in ranked[:n]], hash_buckets=hash_buckets)

    @property
    def dim(self) -> int:
        return sum(w for _, w, _ in self._families)

    def __call__(self, u: TokenizedUtterance) -> FeatureVector:
        parts = []
        prov = []
        off = 0
        for name, width, fn in self._families:
            block = fn(u)
            assert block.shape == (width,)
            parts.append(block)
            prov.append((name, off, width))
            off += width
        return FeatureVector(Tensor(np.concatenate(parts)), tuple(prov))

    # family implementations

    def _word_count(self, u):
        return np.array([float(len(u.tokens))])

    def _hashed_onehot(self, token):
        v = np.zeros(self.hash_buckets)
        if token is not None:
            v[stable_bucket(token, self.hash_buckets)] = 1.0
        return v

    def _first_word(self, u):
        return self._hashed_onehot(u.tokens[0] if u.tokens else None)

    def _last_word(self, u):
        return self._hashed_onehot(u.tokens[-1] if u.tokens else None)

    def _wh(self, u):
        has = float(any(t in WH_WORDS for t in u.tokens))
        first = float(bool(u.tokens) and u.tokens[0] in WH_WORDS)
        return np.array([has, first])

    def _punct(self, u):
        return np.array([float("?" in u.tokens), float("!" in u.tokens)])

    def _person(self, u):
        c1 = sum(t in FIRST_PERSON for t in u.tokens)
        c2 = sum(t in SECOND_PERSON for t in u.tokens)
        c3 = sum(t in THIRD_PERSON for t in u.tokens)
        return np.array([float(c1), float(c2), float(c3)])

    def _imperative(self, u):
        if not u.tokens:
            return np.zeros(1)
        fires = u.tokens[0] in IMPERATIVE_VERBS and u.tokens[0] not in FIRST_PERSON
        return np.array([float(fires)])

    def _inverted_aux(self, u):
        return np.array([float(bool(u.tokens) and u.tokens[0] in AUX_VERBS)])

    def _negation(self, u):
        return np.array([float(any(t in NEGATION_CUES for t in u.tokens))])

    def _top_words(self, u):
        if not self.top_words:
            return np.zeros(1)
        present = set(u.tokens)
        return np.array([float(w in present) for w in self.top_words])

    def _length_stats(self, u):
        words = [t for t in u.tokens if t.isalnum()]
        if not words:
            return np.zeros(3)
        lens = [len(w) for w in words]
        return np.array([sum(lens) / len(lens), float(max(lens)), float(sum(lens))])

    def _count_bucket(self, u):
        v = np.zeros(5)
        n = len(u.tokens)
        v[0 if n == 0 else 1 if n == 1 else 2 if n <= 3 else 3 if n <= 6 else 4] = 1.0
        return v

    def to_json(self) -> dict:
        return {"top_words": list(self.top_words), "hash_buckets": self.hash_buckets}

    @classmethod
    def from_json(cls, doc: dict) -> "TextualFeaturizer":
        return cls(top_words=doc["top_words"], hash_buckets=doc["hash_buckets"])


def textual_features(u: TokenizedUtterance,
                     featurizer: "TextualFeaturizer | None" = None) -> FeatureVector:
    return (featurizer or _DEFAULT_TEXTUAL)(u)


_DEFAULT_TEXTUAL = TextualFeaturizer()


# ---------------------------------------------------------------------------
# speech-act features
# ---------------------------------------------------------------------------


class SpeechActScorer:
    """Deterministic cue scorer over 7 speech-act classes.

    Scores accumulate per class from surface cues (question mark, wh and
    auxiliary openings, pronouns, acknowledgement words, utterance length)
    and are normalized to the simplex. No cue hits at all fall back to the
    uniform distribution so the output is always a distribution.
    """

    classes = SPEECH_ACT_CLASSES

    def __call__(self, u: TokenizedUtterance) -> FeatureVector:
        t = u.tokens
        ts = set(t)
        n = len(t)
        scores = np.zeros(len(self.classes))

        # question
        q = 0.0
        if "?" in ts:
            q += 2.0
        if t and t[0] in WH_WORDS:
            q += 1.5
        if t and t[0] in AUX_VERBS:
            q += 1.5
        if "you" in ts:
            q += 0.25
        scores[0] = q

        # disclosure / edification: first-person statements and plain assertions
        d = 0.0
        d += 1.5 * sum(tok in FIRST_PERSON for tok in t)
        if n >= 3 and "?" not in ts:
            d += 0.5
        scores[1] = d

        # advisement: commands and suggestions
        a = 0.0
        if t and t[0] in IMPERATIVE_VERBS:
            a += 2.0
        if "please" in ts:
            a += 1.0
        if "should" in ts or "try" in ts:
            a += 0.5
        scores[2] = a

        # acknowledgement: short assent tokens
        k = 0.0
        if t and t[0] in ACK_WORDS and n <= 2:
            k += 2.0
        k += 1.0 * sum(tok in ACK_WORDS for tok in t)
        scores[3] = k

        # reflection: mirroring the other speaker's state
        r = 0.0
        if "you" in ts and any(tok in FEELING_VERBS for tok in t):
            r += 1.5
        if "you" in ts and "said" in ts:
            r += 1.5
        scores[4] = r

        # interpretation: reframing markers
        i = 0.0
        if t and t[0] == "so":
            i += 1.0
        if t and t[0] == "well":
            i += 0.75
        if "means" in ts or "because" in ts:
            i += 0.75
        scores[5] = i

        # confirmation
        c = 0.0
        c += 1.0 * sum(tok in CONFIRM_WORDS for tok in t)
        if "?" in ts and ("right" in ts or "correct" in ts):
            c += 1.0
        scores[6] = c

        total = scores.sum()
        if total <= 0.0:
            probs = np.full(len(self.classes), 1.0 / len(self.classes))
        else:
            probs = scores / total
        return _vector("speech_acts", probs)


def speech_act_features(u: TokenizedUtterance) -> FeatureVector:
    return _DEFAULT_SPEECH(u)


_DEFAULT_SPEECH = SpeechActScorer()


# ---------------------------------------------------------------------------
# external embeddings
# ---------------------------------------------------------------------------


class ExternalEmbeddingTable:
    """Precomputed sentence vectors keyed by exact utterance text.

    Misses return the mean of all stored vectors: held-out evaluation has
    to proceed even for texts the embedding dump never saw.
    """

    def __init__(self, dimension: int, entries: Mapping[str, np.ndarray]):
        if dimension < 1:
            raise ValueError("embedding dimension must be positive")
        self.dimension = dimension
        self.entries = {k: np.asarray(v, dtype=np.float64) for k, v in entries.items()}
        for k, v in self.entries.items():
            if v.shape != (dimension,):
                raise ValueError(f"entry {k!r} has shape {v.shape}, expected ({dimension},)")
        if self.entries:
            self._mean = np.mean(list(self.entries.values()), axis=0)
        else:
            self._mean = np.zeros(dimension)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def mean_vector(self) -> np.ndarray:
        return self._mean

    def lookup(self, text: str) -> np.ndarray:
        hit = self.entries.get(text)
        return self._mean if hit is None else hit

    def __contains__(self, text: str) -> bool:
        return text in self.entries

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"DIM {self.dimension}\n")
            for text in sorted(self.entries):
                vec = "\t".join(repr(float(x)) for x in self.entries[text])
                fh.write(f"{vec}\t{text}\n")


def load_external_embeddings(path) -> ExternalEmbeddingTable:
    """Parse the `DIM n` + tab-separated-floats embedding dump format."""
    entries: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise EmbeddingFormatError(path, 1, "empty file, expected 'DIM <n>' header")
        parts = header.split()
        if len(parts) != 2 or parts[0] != "DIM" or not parts[1].isdigit() or int(parts[1]) < 1:
            raise EmbeddingFormatError(path, 1, f"bad header {header.strip()!r}, expected 'DIM <n>'")
        dim = int(parts[1])
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < dim + 1:
                raise EmbeddingFormatError(
                    path, line_no, f"expected {dim} floats + text, got {len(fields)} fields")
            try:
                vec = np.array([float(x) for x in fields[:dim]])
            except ValueError as e:
                raise EmbeddingFormatError(path, line_no, f"bad float: {e}") from None
            text = "\t".join(fields[dim:])
            entries[text] = vec
    return ExternalEmbeddingTable(dim, entries)


# ---------------------------------------------------------------------------
# combined featurizer
# ---------------------------------------------------------------------------

KNOWN_FAMILIES = ("counts", "textual", "speech_acts")


@dataclass(frozen=True)
class FeaturizerConfig:
    """Which feature families feed the sentence vector.

    `families` entries are "counts", "textual", "speech_acts", or
    "external:<source>" where <source> keys into the provided embedding
    tables. `top_words` sizes the frequent-word indicator block.
    """

    families: tuple[str, ...] = ("counts", "textual")
    top_words: int = 48
    hash_buckets: int = 24

    def __post_init__(self):
        if not self.families:
            raise ConfigError("at least one feature family must be enabled")
        for fam in self.families:
            if fam in KNOWN_FAMILIES or fam.startswith("external:"):
                continue
            raise ConfigError(f"unknown feature family {fam!r}")
        if len(set(self.families)) != len(self.families):
            raise ConfigError("duplicate feature families")

    @property
    def external_sources(self) -> tuple[str, ...]:
        return tuple(f.split(":", 1)[1] for f in self.families if f.startswith("external:"))

    def to_json(self) -> dict:
        return {"families": list(self.families), "top_words": self.top_words,
                "hash_buckets": self.hash_buckets}

    @classmethod
    def from_json(cls, doc: dict) -> "FeaturizerConfig":
        return cls(families=tuple(doc["families"]), top_words=doc["top_words"],
                   hash_buckets=doc["hash_buckets"])


class NLUFeaturizer:
    """Materialized featurizer pipeline: config + everything fitted.

    `fit` builds the count vocabulary and top-word list from training
    text. Evaluation text reuses the frozen state; novelty lands in OOV.
    """

    def __init__(self, config: FeaturizerConfig, vocab: CountVocab,
                 textual: TextualFeaturizer, speech: SpeechActScorer,
                 externals: Mapping[str, ExternalEmbeddingTable] | None = None):
        self.config = config
        self.vocab = vocab
        self.textual = textual
        self.speech = speech
        self.externals = dict(externals or {})
        for src in config.external_sources:
            if src not in self.externals:
                raise ConfigError(f"config enables external:{src} but no table was provided")

    @classmethod
    def fit(cls, config: FeaturizerConfig, train_texts: Iterable[str],
            externals: Mapping[str, ExternalEmbeddingTable] | None = None) -> "NLUFeaturizer":
        tokenized = [tokenize(t) for t in train_texts]
        vocab = CountVocab.fit(tokenized)
        textual = TextualFeaturizer.fit_top_words(
            tokenized, n=config.top_words, hash_buckets=config.hash_buckets)
        return cls(config, vocab, textual, SpeechActScorer(), externals)

    @property
    def sentence_dim(self) -> int:
        d = 0
        for fam in self.config.families:
            if fam == "counts":
                d += self.vocab.dim
            elif fam == "textual":
                d += self.textual.dim
            elif fam == "speech_acts":
                d += len(SPEECH_ACT_CLASSES)
            else:
                d += self.externals[fam.split(":", 1)[1]].dimension
        return d

    @property
    def token_dim(self) -> int:
        return self.vocab.token_dim

    def sentence_vector(self, raw: str) -> FeatureVector:
        u = tokenize(raw)
        parts = []
        for fam in self.config.families:
            if fam == "counts":
                parts.append(count_vectorize(u, self.vocab))
            elif fam == "textual":
                parts.append(self.textual(u))
            elif fam == "speech_acts":
                parts.append(self.speech(u))
            else:
                src = fam.split(":", 1)[1]
                parts.append(_vector(fam, self.externals[src].lookup(raw)))
        return concat_features(parts)

    def token_sequence(self, raw: str) -> list[FeatureVector]:
        u = tokenize(raw)
        return [_vector("token_onehot", self.vocab.token_onehot(tok)) for tok in u.tokens]

    def featurize(self, raw: str) -> tuple[FeatureVector, list[FeatureVector]]:
        return self.sentence_vector(raw), self.token_sequence(raw)

    def to_json(self) -> dict:
        # external tables are referenced by source name, never embedded
        return {"config": self.config.to_json(), "vocab": self.vocab.to_json(),
                "textual": self.textual.to_json()}

    @classmethod
    def from_json(cls, doc: dict,
                  externals: Mapping[str, ExternalEmbeddingTable] | None = None
                  ) -> "NLUFeaturizer":
        return cls(FeaturizerConfig.from_json(doc["config"]),
                   CountVocab.from_json(doc["vocab"]),
                   TextualFeaturizer.from_json(doc["textual"]),
                   SpeechActScorer(), externals)


def featurize_utterance(raw: str, featurizer: NLUFeaturizer):
    """Sentence-level vector plus per-token sequence for one utterance."""
    return featurizer.featurize(raw)
