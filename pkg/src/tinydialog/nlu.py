"""Embedding-based intent classifier.

Utterances and intent labels are embedded into one shared space and
scored by cosine similarity. Training pulls each utterance toward its
gold intent and pushes it away from sampled negative intents with a
margin loss. Four utterance encoders are available: a feedforward net
over the sentence vector, an LSTM or BiLSTM over per-token features,
and a single-block transformer. Sequence encoders can be enriched by
concatenating external sentence embeddings before the final projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .featurize import (ConfigError, FeatureVector, FeaturizerConfig,
                        NLUFeaturizer)
from .metrics import EvaluationReport, classification_report

ENCODERS = ("feedforward", "lstm", "bilstm", "transformer")
SEQUENCE_ENCODERS = ("lstm", "bilstm", "transformer")


class NLUError(ValueError):
    """Base class for classifier-level failures."""


class TrainingError(NLUError):
    pass


class EvaluationError(NLUError):
    pass


@dataclass(frozen=True)
class NLUConfig:
    """Hyperparameters for the embedding classifier.

    `hidden` is the feedforward hidden width and doubles as the
    transformer model dimension. `d_embed` is the shared embedding
    space for utterances and intents.
    """

    encoder: str = "feedforward"
    d_embed: int = 20
    hidden: int = 32
    heads: int = 2
    mu_pos: float = 0.8
    mu_neg: float = -0.4
    n_negatives: int = 20
    epochs: int = 300
    batch_size: int = 32
    lr: float = 0.01
    force_uniform_attention: bool = False
    featurizer: FeaturizerConfig = field(default_factory=FeaturizerConfig)

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ConfigError(f"unknown encoder {self.encoder!r}; choose from {ENCODERS}")
        if self.d_embed < 1 or self.hidden < 1:
            raise ConfigError("d_embed and hidden must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.n_negatives < 1:
            raise ConfigError("epochs, batch_size and n_negatives must be positive")
        if self.encoder == "transformer" and self.hidden % self.heads != 0:
            raise ConfigError(f"heads ({self.heads}) must divide the model dim ({self.hidden})")

    def to_json(self) -> dict:
        return {
            "encoder": self.encoder, "d_embed": self.d_embed, "hidden": self.hidden,
            "heads": self.heads, "mu_pos": self.mu_pos, "mu_neg": self.mu_neg,
            "n_negatives": self.n_negatives, "epochs": self.epochs,
            "batch_size": self.batch_size, "lr": self.lr,
            "force_uniform_attention": self.force_uniform_attention,
            "featurizer": self.featurizer.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NLUConfig":
        doc = dict(doc)
        doc["featurizer"] = FeaturizerConfig.from_json(doc["featurizer"])
        return cls(**doc)


@dataclass
class IntentModel:
    config: NLUConfig
    intents: tuple[str, ...]
    featurizer: NLUFeaturizer
    params: dict[str, T.Tensor]
    loss_trace: list[float] = field(default_factory=list)

    @property
    def external_dim(self) -> int:
        return sum(self.featurizer.externals[s].dimension
                   for s in self.config.featurizer.external_sources)


def _ones_param(shape) -> T.Tensor:
    return T.Tensor(np.ones(shape), requires_grad=True)


def _init_lstm(params, prefix: str, rng, in_dim: int, hidden: int) -> None:
    for gate in "ifgo":
        params[f"{prefix}_wx_{gate}"] = T.xavier_uniform(rng, in_dim, hidden)
        params[f"{prefix}_wh_{gate}"] = T.xavier_uniform(rng, hidden, hidden)
        bias = T.zeros_param((hidden,))
        if gate == "f":
            bias.data[:] = 1.0  # forget-gate bias starts open
        params[f"{prefix}_b_{gate}"] = bias


def _init_params(rng, config: NLUConfig, featurizer: NLUFeaturizer,
                 n_intents: int, ext_dim: int) -> dict[str, T.Tensor]:
    d = config.d_embed
    params: dict[str, T.Tensor] = {
        "intent_emb": T.xavier_uniform(rng, n_intents, d),
    }
    if config.encoder == "feedforward":
        params["ff_w1"] = T.xavier_uniform(rng, featurizer.sentence_dim, config.hidden)
        params["ff_b1"] = T.zeros_param((config.hidden,))
        params["ff_w2"] = T.xavier_uniform(rng, config.hidden, d)
        params["ff_b2"] = T.zeros_param((d,))
        return params
    tok = featurizer.token_dim
    if config.encoder == "lstm":
        _init_lstm(params, "lstm", rng, tok, d)
        if ext_dim:
            params["mix_w"] = T.xavier_uniform(rng, d + ext_dim, d)
            params["mix_b"] = T.zeros_param((d,))
    elif config.encoder == "bilstm":
        _init_lstm(params, "fwd", rng, tok, d)
        _init_lstm(params, "bwd", rng, tok, d)
        params["mix_w"] = T.xavier_uniform(rng, 2 * d + ext_dim, d)
        params["mix_b"] = T.zeros_param((d,))
    else:
        m = config.hidden
        params["tok_emb"] = T.xavier_uniform(rng, tok, m)
        for name in ("wq", "wk", "wv", "wo"):
            params[f"attn_{name}"] = T.xavier_uniform(rng, m, m)
        params["ln1_g"] = _ones_param((m,))
        params["ln1_b"] = T.zeros_param((m,))
        params["blk_w1"] = T.xavier_uniform(rng, m, 2 * m)
        params["blk_b1"] = T.zeros_param((2 * m,))
        params["blk_w2"] = T.xavier_uniform(rng, 2 * m, m)
        params["blk_b2"] = T.zeros_param((m,))
        params["ln2_g"] = _ones_param((m,))
        params["ln2_b"] = T.zeros_param((m,))
        params["mix_w"] = T.xavier_uniform(rng, m + ext_dim, d)
        params["mix_b"] = T.zeros_param((d,))
    return params


def _external_slices(model: IntentModel, sentence_fv: FeatureVector) -> np.ndarray | None:
    """Concatenated external-embedding portion of the sentence vector."""
    fams = [f for f in model.config.featurizer.families if f.startswith("external:")]
    if not fams:
        return None
    return np.concatenate([sentence_fv.family_slice(f) for f in fams])


def _feedforward(params, x: T.Tensor) -> T.Tensor:
    """Two dense layers over a batch of sentence vectors: [B x n] -> [B x d]."""
    h = T.relu(T.add_rowvec(T.matmul(x, params["ff_w1"]), params["ff_b1"]))
    return T.add_rowvec(T.matmul(h, params["ff_w2"]), params["ff_b2"])


def _lstm_final(params, prefix: str, xs: T.Tensor) -> T.Tensor:
    """Final hidden state of an LSTM over token rows: [T x e] -> [1 x h]."""
    hidden = params[f"{prefix}_wh_i"].data.shape[0]
    h = T.constant(np.zeros((1, hidden)))
    c = T.constant(np.zeros((1, hidden)))
    for t in range(xs.data.shape[0]):
        x = T.slice_rows(xs, t, t + 1)
        pre = {}
        for gate in "ifgo":
            pre[gate] = T.add_rowvec(
                T.add(T.matmul(x, params[f"{prefix}_wx_{gate}"]),
                      T.matmul(h, params[f"{prefix}_wh_{gate}"])),
                params[f"{prefix}_b_{gate}"])
        i, f, o = T.sigmoid(pre["i"]), T.sigmoid(pre["f"]), T.sigmoid(pre["o"])
        g = T.tanh(pre["g"])
        c = T.add(T.mul(f, c), T.mul(i, g))
        h = T.mul(o, T.tanh(c))
    return h


def _transformer_pool(params, xs: T.Tensor, heads: int,
                      force_uniform: bool) -> T.Tensor:
    """One encoder block then mean pooling: [T x m] -> [m]."""
    n, m = xs.data.shape
    dh = m // heads
    q = T.matmul(xs, params["attn_wq"])
    k = T.matmul(xs, params["attn_wk"])
    v = T.matmul(xs, params["attn_wv"])
    pieces = []
    for h in range(heads):
        lo, hi = h * dh, (h + 1) * dh
        vs = T.slice_last(v, lo, hi)
        if force_uniform:
            attn = T.constant(np.full((n, n), 1.0 / n))
        else:
            scores = T.scale(T.matmul(T.slice_last(q, lo, hi),
                                      T.transpose(T.slice_last(k, lo, hi))),
                             1.0 / math.sqrt(dh))
            attn = T.softmax_rows(scores)
        pieces.append(T.matmul(attn, vs))
    attended = T.matmul(T.concat(pieces, axis=1), params["attn_wo"])
    x1 = T.layer_norm_rows(T.add(xs, attended))
    x1 = T.add_rowvec(T.mul_rowvec(x1, params["ln1_g"]), params["ln1_b"])
    ff = T.relu(T.add_rowvec(T.matmul(x1, params["blk_w1"]), params["blk_b1"]))
    ff = T.add_rowvec(T.matmul(ff, params["blk_w2"]), params["blk_b2"])
    x2 = T.layer_norm_rows(T.add(x1, ff))
    x2 = T.add_rowvec(T.mul_rowvec(x2, params["ln2_g"]), params["ln2_b"])
    return T.mean_rows(x2)


def _project(params, enc: T.Tensor, ext: np.ndarray | None) -> T.Tensor:
    """Optionally append external features, then map into embedding space."""
    if ext is not None:
        enc = T.concat([enc, T.constant(ext)], axis=0)
    flat = T.reshape(enc, (1, enc.data.shape[0]))
    out = T.add_rowvec(T.matmul(flat, params["mix_w"]), params["mix_b"])
    return T.reshape(out, (out.data.shape[1],))


def encode_utterance(model: IntentModel, sentence_fv: FeatureVector,
                     sequence_fvs: list[FeatureVector] | None) -> T.Tensor:
    """Embed one utterance: returns a [d_embed] tensor in the shared space."""
    cfg = model.config
    params = model.params
    if cfg.encoder == "feedforward":
        flat = T.reshape(sentence_fv.dense, (1, sentence_fv.dim))
        out = _feedforward(params, flat)
        return T.reshape(out, (cfg.d_embed,))
    if sequence_fvs is None:
        raise ConfigError(f"{cfg.encoder} encoder requires per-token features")
    ext = _external_slices(model, sentence_fv)
    if not sequence_fvs:
        # no tokens: the recurrent/attention part contributes zeros
        if cfg.encoder == "lstm" and ext is None:
            return T.constant(np.zeros(cfg.d_embed))
        width = {"lstm": cfg.d_embed, "bilstm": 2 * cfg.d_embed,
                 "transformer": cfg.hidden}[cfg.encoder]
        return _project(params, T.constant(np.zeros(width)), ext)
    xs = T.stack_rows([fv.dense for fv in sequence_fvs])
    if cfg.encoder == "lstm":
        h = T.reshape(_lstm_final(params, "lstm", xs), (cfg.d_embed,))
        if ext is None:
            return h
        return _project(params, h, ext)
    if cfg.encoder == "bilstm":
        rev = T.stack_rows([fv.dense for fv in reversed(sequence_fvs)])
        fwd = T.reshape(_lstm_final(params, "fwd", xs), (cfg.d_embed,))
        bwd = T.reshape(_lstm_final(params, "bwd", rev), (cfg.d_embed,))
        return _project(params, T.concat([fwd, bwd], axis=0), ext)
    emb = T.matmul(xs, params["tok_emb"])
    pooled = _transformer_pool(params, emb, cfg.heads, cfg.force_uniform_attention)
    return _project(params, pooled, ext)


def _encode_batch(model: IntentModel, batch_idx, sent_matrix: np.ndarray | None,
                  features) -> T.Tensor:
    """Embed a batch: [B x d_embed]. Feedforward runs fully batched."""
    if model.config.encoder == "feedforward":
        return _feedforward(model.params, T.constant(sent_matrix[batch_idx]))
    return T.stack_rows([encode_utterance(model, *features[i]) for i in batch_idx])


def train_intent_classifier(examples, config: NLUConfig | None = None, seed: int = 0,
                            externals=None) -> IntentModel:
    """Fit the classifier on labeled utterances.

    Loss per example: max(0, mu_pos - sim(u, gold)) plus
    sum_k max(0, sim(u, neg_k) - mu_neg) over sampled negative intents.
    The per-epoch mean loss lands in `model.loss_trace`.
    """
    config = config or NLUConfig()
    examples = list(examples)
    if not examples:
        raise TrainingError("no training examples")
    intents = tuple(sorted({e.intent for e in examples}))
    if len(intents) < 2:
        raise TrainingError(
            f"training needs at least two distinct intents, got {list(intents)}")
    featurizer = NLUFeaturizer.fit(config.featurizer, [e.text for e in examples],
                                   externals)
    rng = np.random.default_rng(seed)
    model = IntentModel(config, intents, featurizer, {})
    model.params = _init_params(rng, config, featurizer, len(intents),
                                model.external_dim)

    n = len(examples)
    n_int = len(intents)
    gold = np.array([intents.index(e.intent) for e in examples])
    sent_matrix = None
    features = None
    if config.encoder == "feedforward":
        sent_matrix = np.stack(
            [featurizer.sentence_vector(e.text).dense.data for e in examples])
    else:
        features = [featurizer.featurize(e.text) for e in examples]
    others = {g: np.array([j for j in range(n_int) if j != g]) for g in range(n_int)}
    with_replacement = (n_int - 1) < config.n_negatives

    opt = T.Adam(model.params, lr=config.lr)
    ones_col = T.constant(np.ones((n_int, 1)))
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            b = len(idx)
            pos_mask = np.zeros((b, n_int))
            neg_counts = np.zeros((b, n_int))
            for bi, ei in enumerate(idx):
                g = gold[ei]
                pos_mask[bi, g] = 1.0
                sampled = rng.choice(others[g], size=config.n_negatives,
                                     replace=with_replacement)
                np.add.at(neg_counts[bi], sampled, 1.0)
            opt.zero_grad()
            with T.Tape():
                u = _encode_batch(model, idx, sent_matrix, features)
                sims = T.cosine_matrix(u, model.params["intent_emb"])
                s_pos = T.matmul(T.mul(sims, T.constant(pos_mask)), ones_col)
                pos_part = T.sum_all(T.relu(T.add_scalar(T.scale(s_pos, -1.0),
                                                         config.mu_pos)))
                neg_hinge = T.relu(T.add_scalar(sims, -config.mu_neg))
                neg_part = T.sum_all(T.mul(neg_hinge, T.constant(neg_counts)))
                loss = T.scale(T.add(pos_part, neg_part), 1.0 / b)
                T.backward(loss)
            opt.step()
            total += float(loss.data) * b
        model.loss_trace.append(total / n)
    return model


def predict_intent(model: IntentModel, utterance: str) -> list[tuple[str, float]]:
    """Full intent ranking for one utterance.

    Confidence is cosine similarity rescaled to [0, 1] via (s + 1) / 2.
    Equal scores break ties by intent name.
    """
    sentence_fv, sequence_fvs = model.featurizer.featurize(utterance)
    u = encode_utterance(model, sentence_fv, sequence_fvs)
    sims = T.cosine_rows(u, model.params["intent_emb"]).data
    ranked = sorted(zip(model.intents, sims), key=lambda kv: (-kv[1], kv[0]))
    return [(name, (float(s) + 1.0) / 2.0) for name, s in ranked]


def evaluate_nlu(model: IntentModel, examples) -> EvaluationReport:
    """Score top-1 predictions against gold labels."""
    examples = list(examples)
    if not examples:
        raise EvaluationError("cannot evaluate on an empty example set")
    unknown = sorted({e.intent for e in examples} - set(model.intents))
    if unknown:
        raise EvaluationError(f"examples use intents the model never saw: {unknown}")
    y_true = [e.intent for e in examples]
    y_pred = [predict_intent(model, e.text)[0][0] for e in examples]
    return classification_report(y_true, y_pred, labels=model.intents)


def save_intent_model(path, model: IntentModel) -> None:
    meta = {
        "kind": "intent-model",
        "config": model.config.to_json(),
        "intents": list(model.intents),
        "featurizer": model.featurizer.to_json(),
        "loss_trace": model.loss_trace,
    }
    T.save_checkpoint(path, model.params, meta)


def load_intent_model(path, externals=None) -> IntentModel:
    params, meta = T.load_checkpoint(path)
    if meta.get("kind") != "intent-model":
        raise ValueError(f"{path}: not an intent-model checkpoint")
    config = NLUConfig.from_json(meta["config"])
    featurizer = NLUFeaturizer.from_json(meta["featurizer"], externals)
    return IntentModel(config, tuple(meta["intents"]), featurizer, params,
                       list(meta["loss_trace"]))


BASE_FAMILIES = ("counts", "textual")

#: Encoder/feature grid mirroring the usual enrichment ladder: sparse
#: baseline, added speech acts, added external sentence embeddings,
#: then sequence encoders with and without external enrichment.
ABLATION_GRID: tuple[tuple[str, NLUConfig], ...] = (
    ("baseline", NLUConfig()),
    ("baseline+sa", NLUConfig(featurizer=FeaturizerConfig(
        families=BASE_FAMILIES + ("speech_acts",)))),
    ("baseline+use", NLUConfig(featurizer=FeaturizerConfig(
        families=BASE_FAMILIES + ("external:use",)))),
    ("baseline+bert", NLUConfig(featurizer=FeaturizerConfig(
        families=BASE_FAMILIES + ("external:bert",)))),
    ("baseline+use+sa+bert", NLUConfig(featurizer=FeaturizerConfig(
        families=BASE_FAMILIES + ("speech_acts", "external:use", "external:bert")))),
    ("lstm", NLUConfig(encoder="lstm")),
    ("bilstm", NLUConfig(encoder="bilstm")),
    ("bert+transformer", NLUConfig(encoder="transformer",
                                   featurizer=FeaturizerConfig(
                                       families=BASE_FAMILIES + ("external:bert",)))),
)


def run_nlu_ablation(train_examples, test_examples, externals=None, grid=None,
                     seed: int = 0, epochs: int | None = None) -> list[dict]:
    """Train and score every grid config; returns one result row per config."""
    rows = []
    for name, cfg in (grid if grid is not None else ABLATION_GRID):
        if epochs is not None:
            cfg = NLUConfig.from_json({**cfg.to_json(), "epochs": epochs})
        model = train_intent_classifier(train_examples, cfg, seed=seed,
                                        externals=externals)
        report = evaluate_nlu(model, test_examples)
        rows.append({
            "config": name,
            "encoder": cfg.encoder,
            "families": ",".join(cfg.featurizer.families),
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "accuracy": report.accuracy,
        })
    return rows
