"""Entrainment-based response adaptation.

Scores candidate responses by how much they linguistically align with
the recent user context: shared word stems, part-of-speech overlap,
shared POS bigrams (a cheap proxy for syntactic structure), sentiment
polarity agreement, and length ratio.  A small CART decision tree is
trained on automatically labeled (context, candidate) pairs and used to
pick the best-aligned candidate from a template list.

Everything here is rule-and-lexicon based on purpose: no external
taggers or parsers, fully deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .featurize import (FeatureVector, TokenizedUtterance, _vector,
                        concat_features, tokenize)


class AdaptationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# stemmer, tagger, polarity
# ---------------------------------------------------------------------------


def stem_token(token: str) -> str:
    """Crude suffix-stripping stemmer (s / es / ed / ing).

    Consistency beats linguistics here: the same surface family must map
    to one stem so overlap counting works; occasional odd stems are fine.
    """
    t = token.lower()
    if len(t) < 4:
        return t
    if t.endswith("ing") and len(t) >= 6:
        return t[:-3]
    if t.endswith("ied"):
        return t[:-1]
    if t.endswith("ed") and len(t) >= 5:
        return t[:-2]
    if t.endswith("ies"):
        return t[:-1]
    if t.endswith(("ses", "xes", "zes", "ches", "shes")):
        return t[:-2]
    if t.endswith("s") and not t.endswith("ss"):
        return t[:-1]
    return t


POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "PREP", "CONJ",
            "NUM", "INT", "PUNCT", "X")

_POS_LEXICON: dict[str, str] = {}
for _tag, _words in (
    ("PRON", "i you he she it we they me him her us them my your his its our "
             "their mine yours this that these those who what which someone "
             "anyone everyone something anything nothing myself yourself"),
    ("DET", "a an the some any no every each all both few many much more most "
            "other another such"),
    ("PREP", "in on at by for with from to of about over under into onto up "
             "down off around through near behind after before during"),
    ("CONJ", "and or but so because if when while although than"),
    ("INT", "oh wow oops yay hey hi hello aww ouch hmm umm uh huh whoops ooh "
            "ugh meh beep boop whirr yo bye okay ok yes no yeah nope yep nah"),
    ("VERB", "is am are was were be been being have has had do does did can "
             "could will would should shall may might must go goes went going "
             "gone like likes liked love loves loved want wants wanted play "
             "plays played say says said see sees saw know knows knew think "
             "thinks thought feel feels felt make makes made get gets got "
             "come comes came take takes took look looks looked tell tells "
             "told give gives gave help helps helped try tries tried stop "
             "stops stopped run runs ran jump jumps jumped touch touches "
             "touched clap claps clapped turn turns turned wave waves waved "
             "shake shakes nod nods blink blinks point points spin spins hop "
             "hops wiggle wiggles pat pats rub rubs snap snaps stomp stomps "
             "raise raises eat eats ate sleep sleeps slept hear hears heard "
             "listen listens miss missed missed learn learned read reads sing "
             "sings sang dance dances danced draw draws drew swim swims swam "
             "win wins won lose loses lost hurt hurts ask asks asked need "
             "needs needed talk talks talked walk walks walked call calls "
             "called live lives lived let lets wait waits waited keep keeps "
             "kept show shows showed"),
    ("ADJ", "good bad great big small little nice fun funny happy sad tired "
            "bored sick cool awesome wonderful terrible awful best worst new "
            "old young fast slow hard easy hot cold warm sunny rainy cloudy "
            "windy snowy loud quiet bright dark red blue green yellow orange "
            "purple pink fluffy cute scary yummy gross heavy tiny huge ready "
            "sorry sure fine okay wrong right favorite silly smart long short "
            "tall boring lame mean fair weird confused lost stuck dizzy ill "
            "grumpy upset mad lovely shiny friendly"),
    ("ADV", "very really so too also just now then here there today tomorrow "
            "yesterday soon later never always sometimes again once twice "
            "almost quite maybe please well back away together alone fast "
            "slowly more most"),
):
    for _w in _words.split():
        _POS_LEXICON.setdefault(_w, _tag)

_NOUNISH = {"name", "game", "robot", "rules", "move", "day", "school",
            "teacher", "homework", "dog", "cat", "fish", "pet", "birthday",
            "mom", "dad", "friend", "head", "nose", "hands", "arms", "feet"}
for _w in _NOUNISH:
    _POS_LEXICON.setdefault(_w, "NOUN")


def pos_tag(token: str) -> str:
    t = token.lower()
    if t in _POS_LEXICON:
        return _POS_LEXICON[t]
    if t in {".", ",", "?", "!", "'"}:
        return "PUNCT"
    if t.isdigit():
        return "NUM"
    if t.endswith("ly"):
        return "ADV"
    if t.endswith(("ing", "ed")):
        return "VERB"
    if t.endswith("est") or t.endswith("er") and len(t) > 4:
        return "ADJ"
    return "NOUN"


def tag_sequence(tokens) -> tuple:
    return tuple(pos_tag(t) for t in tokens)


_POSITIVE_WORDS = frozenset(
    """good great love like likes fun funny happy glad awesome nice cool best
    wonderful yummy cute sweet super amazing fantastic excellent lovely enjoy
    yay favorite beautiful friendly shiny smart brave win winner exciting
    excited perfect pretty delicious tasty giggle smile laugh hooray bright
    cheerful kind gentle""".split()
)

_NEGATIVE_WORDS = frozenset(
    """bad sad boring hate hates hurt hurts sick gross worst mad angry annoying
    annoyed scary scared terrible awful yucky icky mean unfair lame dumb stupid
    tired bored upset grumpy cry crying broken wrong lost wrongs sorry sore
    dizzy ill fever ache pain ugh worse stinky messy""".split()
)


def polarity(tokens) -> int:
    """Sign of (#positive - #negative) lexicon hits: -1, 0, or 1."""
    score = 0
    for t in tokens:
        tl = t.lower()
        if tl in _POSITIVE_WORDS:
            score += 1
        elif tl in _NEGATIVE_WORDS:
            score -= 1
    return (score > 0) - (score < 0)


# ---------------------------------------------------------------------------
# pairwise feature extraction
# ---------------------------------------------------------------------------

_CONTENT_SKIP = frozenset(
    """i a an the is am are was were be do does did have has my your me you it
    its we they to of in on at and or so that this too not no yes .. , ? ! '
    """.split()
) | {".", ",", "?", "!", "'"}


def is_content_word(token: str) -> bool:
    return token.lower() not in _CONTENT_SKIP


def content_stems(u: TokenizedUtterance) -> set:
    return {stem_token(t) for t in u.tokens if is_content_word(t)}


def _jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union) if union else 1.0


def _pos_bigrams(tags) -> set:
    return {(tags[i], tags[i + 1]) for i in range(len(tags) - 1)}


def extract_adaptation_features(context: TokenizedUtterance,
                                candidate: TokenizedUtterance) -> FeatureVector:
    """Fixed ~40-dim alignment feature registry for a (context, candidate) pair.

    Families (order frozen): stem overlap, POS-tag overlap, POS-bigram
    overlap, sentiment polarity, length, surface echoes.
    """
    ctx_stems, cand_stems = content_stems(context), content_stems(candidate)
    overlap = len(ctx_stems & cand_stems)
    fv_stems = _vector("stem_overlap", [float(overlap),
                                        _jaccard(ctx_stems, cand_stems)])

    ctx_tags = tag_sequence(context.tokens)
    cand_tags = tag_sequence(candidate.tokens)
    shared_types = set(ctx_tags) & set(cand_tags)
    per_tag = []
    for tag in POS_TAGS[:10]:
        per_tag.append(float(min(ctx_tags.count(tag), cand_tags.count(tag))))
    fv_pos = _vector("pos_overlap", [float(len(shared_types))] + per_tag)

    ctx_bi, cand_bi = _pos_bigrams(ctx_tags), _pos_bigrams(cand_tags)
    fv_bigram = _vector("pos_bigram_overlap",
                        [float(len(ctx_bi & cand_bi)), _jaccard(ctx_bi, cand_bi)])

    ctx_pol, cand_pol = polarity(context.tokens), polarity(candidate.tokens)
    fv_polarity = _vector("polarity", [float(ctx_pol), float(cand_pol),
                                       1.0 if ctx_pol == cand_pol else 0.0])

    n_ctx, n_cand = len(context.tokens), len(candidate.tokens)
    ratio = min(n_ctx, n_cand) / max(n_ctx, n_cand) if max(n_ctx, n_cand) else 1.0
    fv_length = _vector("length", [float(n_ctx), float(n_cand), ratio])

    exact_shared = len({t.lower() for t in context.tokens}
                       & {t.lower() for t in candidate.tokens})
    cand_hist = [float(cand_tags.count(tag)) for tag in POS_TAGS[:10]]
    first_match = 1.0 if (ctx_tags and cand_tags and ctx_tags[0] == cand_tags[0]) else 0.0
    last_match = 1.0 if (ctx_tags and cand_tags and ctx_tags[-1] == cand_tags[-1]) else 0.0
    q_ctx = 1.0 if "?" in context.tokens else 0.0
    q_cand = 1.0 if "?" in candidate.tokens else 0.0
    excl = 1.0 if (("!" in context.tokens) == ("!" in candidate.tokens)) else 0.0
    fv_surface = _vector("surface", [float(exact_shared), first_match,
                                     last_match, q_ctx, q_cand, excl] + cand_hist)

    return concat_features([fv_stems, fv_pos, fv_bigram, fv_polarity,
                            fv_length, fv_surface])


FEATURE_NAMES = tuple(
    f"{name}[{i}]"
    for name, width in (("stem_overlap", 2), ("pos_overlap", 11),
                        ("pos_bigram_overlap", 2), ("polarity", 3),
                        ("length", 3), ("surface", 16))
    for i in range(width)
)

# registry positions the auto-labeling rule reads
_IDX_STEM_OVERLAP = 0
_IDX_BIGRAM_OVERLAP = 13
_IDX_POLARITY_MATCH = 17


# ---------------------------------------------------------------------------
# automatic labeling
# ---------------------------------------------------------------------------

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class AdaptationInstance:
    context: TokenizedUtterance
    candidate: TokenizedUtterance
    features: FeatureVector
    label: str


def overlap_score(features: FeatureVector) -> float:
    """Weighted-overlap labeling score.

    Zero stem overlap scores 0 outright; otherwise the overlap count
    plus half a point each for sharing a POS bigram and for matching
    polarity.  With the default threshold 2.0 this makes a pair positive
    iff stem overlap >= 2, or overlap >= 1 with both bonuses.
    """
    x = features.dense.data
    s = float(x[_IDX_STEM_OVERLAP])
    if s == 0.0:
        return 0.0
    return s + 0.5 * (x[_IDX_BIGRAM_OVERLAP] >= 1.0) + 0.5 * (x[_IDX_POLARITY_MATCH] == 1.0)


def auto_label_instances(cases, theta: float = 2.0, require_positive: bool = True):
    """Label every (context, candidate) pair of every case by the θ rule.

    Returns (instances, counts) where counts maps label -> frequency.
    Raises if θ leaves zero positives (unless `require_positive` is off):
    that labeling run is useless for training and the threshold needs
    adjusting.
    """
    instances = []
    counts = {POSITIVE: 0, NEGATIVE: 0}
    for case in cases:
        ctx = tokenize(" ".join(case.context))
        for cand_text in case.candidates:
            cand = tokenize(cand_text)
            fv = extract_adaptation_features(ctx, cand)
            label = POSITIVE if overlap_score(fv) >= theta else NEGATIVE
            counts[label] += 1
            instances.append(AdaptationInstance(ctx, cand, fv, label))
    if require_positive and instances and counts[POSITIVE] == 0:
        raise AdaptationError(
            f"theta={theta} produced zero positive instances over "
            f"{len(instances)} pairs; lower the threshold")
    return instances, counts


# ---------------------------------------------------------------------------
# CART decision tree
# ---------------------------------------------------------------------------


def gini(labels) -> float:
    """Plain (unweighted) Gini impurity of a label multiset."""
    labels = list(labels)
    if not labels:
        return 0.0
    n = len(labels)
    acc = 0.0
    for cls in set(labels):
        p = labels.count(cls) / n
        acc += p * p
    return 1.0 - acc


@dataclass(frozen=True)
class _Leaf:
    klass: str
    probabilities: tuple  # (p_negative, p_positive), sums to 1


@dataclass(frozen=True)
class _Split:
    feature: int
    threshold: float
    left: object  # feature <= threshold
    right: object


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 8
    min_samples_leaf: int = 5
    class_weighted: bool = True


@dataclass(frozen=True)
class DecisionTree:
    root: object
    params: TreeParams
    feature_names: tuple = FEATURE_NAMES

    def predict_proba(self, features: FeatureVector) -> tuple:
        x = features.dense.data
        node = self.root
        while isinstance(node, _Split):
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.probabilities

    def predict(self, features: FeatureVector) -> str:
        node = self.root
        x = features.dense.data
        while isinstance(node, _Split):
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.klass

    def decision_path_length(self, features: FeatureVector) -> int:
        x = features.dense.data
        node, depth = self.root, 0
        while isinstance(node, _Split):
            node = node.left if x[node.feature] <= node.threshold else node.right
            depth += 1
        return depth

    def depth(self) -> int:
        def walk(node):
            if isinstance(node, _Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def n_leaves(self) -> int:
        def walk(node):
            if isinstance(node, _Leaf):
                return 1
            return walk(node.left) + walk(node.right)
        return walk(self.root)


def _weighted_impurity(pos_w: float, neg_w: float) -> float:
    total = pos_w + neg_w
    if total <= 0.0:
        return 0.0
    p, q = pos_w / total, neg_w / total
    return 1.0 - p * p - q * q


def _make_leaf(y, w_pos: float, w_neg: float) -> _Leaf:
    n = len(y)
    n_pos = int(np.sum(y))
    probs = (1.0 - n_pos / n, n_pos / n) if n else (1.0, 0.0)
    # predicted class by weighted mass, negative wins exact ties
    klass = POSITIVE if n_pos * w_pos > (n - n_pos) * w_neg else NEGATIVE
    return _Leaf(klass=klass, probabilities=probs)


def _grow(X, y, depth, params: TreeParams, w_pos: float, w_neg: float):
    n = len(y)
    n_pos = int(np.sum(y))
    if (depth >= params.max_depth or n < 2 * params.min_samples_leaf
            or n_pos == 0 or n_pos == n):
        return _make_leaf(y, w_pos, w_neg)

    parent_imp = _weighted_impurity(n_pos * w_pos, (n - n_pos) * w_neg)
    best = None  # (neg_reduction, feature, threshold) for lexicographic min
    n_features = X.shape[1]
    for j in range(n_features):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        col_sorted = col[order]
        y_sorted = y[order]
        left_pos = 0.0
        left_n = 0
        total_pos = float(n_pos)
        for i in range(n - 1):
            left_pos += y_sorted[i]
            left_n += 1
            if col_sorted[i] == col_sorted[i + 1]:
                continue
            if left_n < params.min_samples_leaf or n - left_n < params.min_samples_leaf:
                continue
            right_pos = total_pos - left_pos
            right_n = n - left_n
            li = _weighted_impurity(left_pos * w_pos, (left_n - left_pos) * w_neg)
            ri = _weighted_impurity(right_pos * w_pos, (right_n - right_pos) * w_neg)
            lw = (left_pos * w_pos + (left_n - left_pos) * w_neg)
            rw = (right_pos * w_pos + (right_n - right_pos) * w_neg)
            child = (lw * li + rw * ri) / (lw + rw)
            reduction = parent_imp - child
            if reduction <= 1e-12:
                continue
            threshold = 0.5 * (col_sorted[i] + col_sorted[i + 1])
            key = (-reduction, j, threshold)
            if best is None or key < best:
                best = key
    if best is None:
        return _make_leaf(y, w_pos, w_neg)
    _, j, threshold = best
    mask = X[:, j] <= threshold
    left = _grow(X[mask], y[mask], depth + 1, params, w_pos, w_neg)
    right = _grow(X[~mask], y[~mask], depth + 1, params, w_pos, w_neg)
    return _Split(feature=j, threshold=threshold, left=left, right=right)


def train_decision_tree(instances, params: TreeParams | None = None,
                        seed: int = 0) -> DecisionTree:
    """Greedy CART on the alignment features. Fully deterministic: best
    split by impurity reduction with (feature index, threshold) as the
    tie-break; the seed argument is accepted for interface symmetry."""
    del seed
    params = params or TreeParams()
    if not instances:
        raise AdaptationError("no instances to train on")
    X = np.stack([inst.features.dense.data for inst in instances])
    y = np.array([1.0 if inst.label == POSITIVE else 0.0 for inst in instances])
    n_pos = int(np.sum(y))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        warnings.warn("single-class training data; tree degenerates to one leaf")
        w = (1.0, 1.0)
        return DecisionTree(root=_make_leaf(y, *w), params=params)
    if params.class_weighted:
        # inverse-frequency weights, normalized to mean 1
        total = len(y)
        w_pos = total / (2.0 * n_pos)
        w_neg = total / (2.0 * n_neg)
    else:
        w_pos = w_neg = 1.0
    root = _grow(X, y, 0, params, w_pos, w_neg)
    return DecisionTree(root=root, params=params)


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------


def select_response(tree: DecisionTree, context, candidates):
    """Pick the candidate with the highest positive-class probability.

    `context` is a string or an iterable of recent utterance strings.
    Ties keep the earliest candidate. Returns (best_text, scores).
    """
    if not candidates:
        raise AdaptationError("select_response needs at least one candidate")
    if not isinstance(context, str):
        context = " ".join(context)
    ctx = tokenize(context)
    scores = []
    for cand_text in candidates:
        fv = extract_adaptation_features(ctx, tokenize(cand_text))
        scores.append(tree.predict_proba(fv)[1])
    best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
    return candidates[best], scores


def evaluate_tree(tree: DecisionTree, instances) -> float:
    if not instances:
        raise AdaptationError("empty evaluation set")
    correct = sum(1 for inst in instances if tree.predict(inst.features) == inst.label)
    return correct / len(instances)


def crossval_accuracy(cases, k: int = 5, params: TreeParams | None = None,
                      theta: float = 2.0, seed: int = 0):
    """K-fold held-out accuracy with whole cases held out together.

    Folding by case rather than by instance keeps every pair sharing a
    context on one side of the boundary. Returns (mean, per_fold).
    """
    cases = list(cases)
    if len(cases) < k:
        raise AdaptationError(f"need at least k={k} cases, got {len(cases)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(cases))
    folds = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(cases[idx])
    per_fold = []
    for i in range(k):
        train_cases = [c for j, fold in enumerate(folds) if j != i for c in fold]
        train_inst, _ = auto_label_instances(train_cases, theta=theta)
        test_inst, _ = auto_label_instances(folds[i], theta=theta,
                                            require_positive=False)
        tree = train_decision_tree(train_inst, params=params)
        per_fold.append(evaluate_tree(tree, test_inst))
    return float(np.mean(per_fold)), per_fold
