"""Linear-chain CRF: lattice scoring, exact log-space inference, elastic-net
training via orthant-wise quasi-Newton, Viterbi decoding, and a text model
format.

The chain factorizes into per-position emission scores (sums of indexed
feature weights) and a single label-pair transition matrix shared across
positions. There are no start/stop parameters; boundary information rides
on the BOS/EOS features.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .features import FeatureIndex, FeatureTemplate, FeatureVector
from .optim import DivergenceError, minimize_owlqn

MODEL_MAGIC = "PERTCRF"
MODEL_VERSION = "v1"

TrainingDivergedError = DivergenceError


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    l1: float = 0.1
    l2: float = 0.1
    max_iterations: int = 100
    memory: int = 10
    tolerance: float = 1e-5

    def __post_init__(self):
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("regularization coefficients must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.memory < 1:
            raise ValueError("memory must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class CrfModel:
    labels: tuple[str, ...]
    feature_index: FeatureIndex
    emission: np.ndarray  # (F, L)
    transition: np.ndarray  # (L, L)
    template: FeatureTemplate

    def __post_init__(self):
        L = len(self.labels)
        if L == 0 or len(set(self.labels)) != L:
            raise ValueError("labels must be non-empty and distinct")
        if self.emission.shape != (len(self.feature_index), L):
            raise ValueError(
                f"emission weights shape {self.emission.shape} != "
                f"({len(self.feature_index)}, {L})"
            )
        if self.transition.shape != (L, L):
            raise ValueError(f"transition weights shape {self.transition.shape} != ({L}, {L})")
        if not (np.all(np.isfinite(self.emission)) and np.all(np.isfinite(self.transition))):
            raise ValueError("weights must be finite")
        self.emission.flags.writeable = False
        self.transition.flags.writeable = False

    def label_ids(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}


@dataclass(frozen=True)
class Lattice:
    log_emission: np.ndarray  # (T, L)
    log_transition: np.ndarray  # (L, L)

    def __post_init__(self):
        if self.log_emission.ndim != 2 or self.log_emission.shape[0] < 1:
            raise ValueError("log_emission must be (T, L) with T >= 1")
        L = self.log_emission.shape[1]
        if self.log_transition.shape != (L, L):
            raise ValueError("log_transition must be (L, L)")


def logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """Max-shifted log(sum(exp(a))), stable for large magnitudes."""
    a = np.asarray(a, dtype=np.float64)
    if axis is None:
        m = float(a.max())
        return m + float(np.log(np.exp(a - m).sum()))
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)), axis=axis)


def score_lattice(model: CrfModel, features: Sequence[FeatureVector]) -> Lattice:
    """Emission scores from active indexed features; unknown strings score 0."""
    L = len(model.labels)
    em = np.zeros((len(features), L))
    for t, keys in enumerate(features):
        idx = model.feature_index.encode(keys)
        if idx:
            em[t] = model.emission[idx].sum(axis=0)
    return Lattice(log_emission=em, log_transition=model.transition)


def forward(lattice: Lattice) -> tuple[np.ndarray, float]:
    """Forward recursion in log space; returns (alphas, log_Z)."""
    em = lattice.log_emission
    trans = lattice.log_transition
    T = em.shape[0]
    alphas = np.empty_like(em)
    alphas[0] = em[0]
    for t in range(1, T):
        scores = alphas[t - 1][:, None] + trans
        m = scores.max(axis=0)
        alphas[t] = em[t] + m + np.log(np.exp(scores - m).sum(axis=0))
    return alphas, float(logsumexp(alphas[-1]))


def backward(lattice: Lattice) -> tuple[np.ndarray, float]:
    """Backward recursion; log_Z from this direction must agree with
    forward's."""
    em = lattice.log_emission
    trans = lattice.log_transition
    T = em.shape[0]
    betas = np.empty_like(em)
    betas[T - 1] = 0.0
    for t in range(T - 2, -1, -1):
        scores = trans + (em[t + 1] + betas[t + 1])[None, :]
        m = scores.max(axis=1)
        betas[t] = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
    return betas, float(logsumexp(em[0] + betas[0]))


def marginals(
    lattice: Lattice, alphas: np.ndarray, betas: np.ndarray, log_z: float
) -> tuple[np.ndarray, np.ndarray]:
    """Unary (T, L) and pairwise (T-1, L, L) posterior marginals."""
    em = lattice.log_emission
    trans = lattice.log_transition
    T, L = em.shape
    unary = np.exp(alphas + betas - log_z)
    if T > 1:
        pairwise = np.exp(
            alphas[:-1, :, None] + trans[None, :, :] + (em[1:] + betas[1:])[:, None, :] - log_z
        )
    else:
        pairwise = np.zeros((0, L, L))
    return unary, pairwise


def decode_lattice(lattice: Lattice) -> tuple[list[int], float]:
    """Viterbi over a scored lattice; ties break toward the lower label
    index at every backtrace decision."""
    em = lattice.log_emission
    trans = lattice.log_transition
    T, L = em.shape
    delta = em[0].copy()
    back = np.empty((T, L), dtype=np.int64)
    for t in range(1, T):
        scores = delta[:, None] + trans
        back[t] = scores.argmax(axis=0)
        delta = scores[back[t], np.arange(L)] + em[t]
    last = int(delta.argmax())
    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t][path[-1]]))
    path.reverse()
    return path, float(delta[last])


def viterbi(model: CrfModel, features: Sequence[FeatureVector]) -> tuple[list[str], float]:
    path, score = decode_lattice(score_lattice(model, features))
    return [model.labels[i] for i in path], score


def gold_path_score(lattice: Lattice, label_ids: Sequence[int]) -> float:
    em = lattice.log_emission
    y = np.asarray(label_ids, dtype=np.int64)
    score = float(em[np.arange(len(y)), y].sum())
    if len(y) > 1:
        score += float(lattice.log_transition[y[:-1], y[1:]].sum())
    return score


def nll_and_gradient(
    model: CrfModel,
    batch: Sequence[tuple[Sequence[FeatureVector], Sequence[str]]],
    l2: float = 0.0,
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Negative log-likelihood of the batch plus an optional ridge term,
    with its gradient (expected minus empirical feature counts, plus l2*w).

    The L1 penalty is deliberately absent: it is non-smooth and belongs to
    the optimizer, not the gradient.
    """
    ids = model.label_ids()
    grad_e = np.zeros_like(model.emission)
    grad_t = np.zeros_like(model.transition)
    nll = 0.0
    for sent_i, (features, gold) in enumerate(batch):
        if len(features) != len(gold):
            raise ValueError(f"sentence {sent_i}: {len(features)} positions, {len(gold)} labels")
        try:
            y = [ids[g] for g in gold]
        except KeyError as exc:
            raise ValueError(f"gold label {exc.args[0]!r} not in model labels") from None
        lattice = score_lattice(model, features)
        alphas, log_z = forward(lattice)
        betas, _ = backward(lattice)
        unary, pairwise = marginals(lattice, alphas, betas, log_z)
        nll += log_z - gold_path_score(lattice, y)
        for t, keys in enumerate(features):
            idx = model.feature_index.encode(keys)
            if idx:
                grad_e[idx] += unary[t]
                grad_e[idx, y[t]] -= 1.0
        if len(y) > 1:
            grad_t += pairwise.sum(axis=0)
            np.subtract.at(grad_t, (np.asarray(y[:-1]), np.asarray(y[1:])), 1.0)
    if l2 > 0.0:
        nll += 0.5 * l2 * (float(np.sum(model.emission**2)) + float(np.sum(model.transition**2)))
        grad_e += l2 * model.emission
        grad_t += l2 * model.transition
    return nll, (grad_e, grad_t)


# ---------------------------------------------------------------------------
# Training on pre-encoded sentences (index lookups done once, not per
# iteration).


@dataclass
class _Encoded:
    idx: np.ndarray  # int32 concatenated active feature indices
    counts: np.ndarray  # int32 active-feature count per position
    rows: np.ndarray  # int32 position id per entry of idx
    offsets: np.ndarray  # int32 start of each position's slice in idx
    labels: np.ndarray  # int64 gold label ids
    dense: bool  # every position has at least one active feature


def _encode_sentence(
    features: Sequence[FeatureVector], gold: Sequence[str], index: FeatureIndex, ids: dict[str, int]
) -> _Encoded:
    if len(features) != len(gold):
        raise ValueError(f"{len(features)} positions but {len(gold)} labels")
    if not features:
        raise ValueError("empty sentence")
    try:
        labels = np.array([ids[g] for g in gold], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"gold label {exc.args[0]!r} not in label set") from None
    per_pos = [index.encode(keys) for keys in features]
    counts = np.array([len(p) for p in per_pos], dtype=np.int32)
    idx = np.concatenate([np.asarray(p, dtype=np.int32) for p in per_pos if p] or [np.zeros(0, np.int32)])
    rows = np.repeat(np.arange(len(per_pos), dtype=np.int32), counts)
    offsets = np.zeros(len(per_pos), dtype=np.int32)
    np.cumsum(counts[:-1], out=offsets[1:])
    return _Encoded(
        idx=idx,
        counts=counts,
        rows=rows,
        offsets=offsets,
        labels=labels,
        dense=bool(counts.min() > 0) if len(counts) else False,
    )


class _Objective:
    """Smooth part of the training objective (NLL + ridge) as a flat-vector
    function for the optimizer. Accumulation order is fixed, so results are
    bit-reproducible for a fixed sentence order and thread count."""

    def __init__(self, encoded: list[_Encoded], n_features: int, n_labels: int, l2: float, n_threads: int = 1):
        self.encoded = encoded
        self.F = n_features
        self.L = n_labels
        self.l2 = l2
        self.n_threads = max(1, n_threads)
        # Empirical counts never change; fold them into a constant gradient
        # term up front.
        emp_e = np.zeros((self.F, self.L))
        emp_t = np.zeros((self.L, self.L))
        for enc in encoded:
            np.add.at(emp_e, (enc.idx, np.repeat(enc.labels, enc.counts)), 1.0)
            if len(enc.labels) > 1:
                np.add.at(emp_t, (enc.labels[:-1], enc.labels[1:]), 1.0)
        self._emp_e = emp_e
        self._emp_t = emp_t

    def _emission_scores(self, w_e: np.ndarray, enc: _Encoded) -> np.ndarray:
        T = len(enc.labels)
        if enc.dense:
            return np.add.reduceat(w_e[enc.idx], enc.offsets, axis=0)
        em = np.zeros((T, self.L))
        if len(enc.idx):
            np.add.at(em, enc.rows, w_e[enc.idx])
        return em

    def _chunk(self, w_e: np.ndarray, w_t: np.ndarray, chunk: list[_Encoded]):
        nll = 0.0
        exp_e = np.zeros((self.F, self.L))
        exp_t = np.zeros((self.L, self.L))
        for enc in chunk:
            em = self._emission_scores(w_e, enc)
            lattice = Lattice(log_emission=em, log_transition=w_t)
            alphas, log_z = forward(lattice)
            betas, _ = backward(lattice)
            unary, pairwise = marginals(lattice, alphas, betas, log_z)
            nll += log_z - gold_path_score(lattice, enc.labels)
            if len(enc.idx):
                np.add.at(exp_e, enc.idx, unary[enc.rows])
            if len(enc.labels) > 1:
                exp_t += pairwise.sum(axis=0)
        return nll, exp_e, exp_t

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        split = self.F * self.L
        w_e = x[:split].reshape(self.F, self.L)
        w_t = x[split:].reshape(self.L, self.L)
        if self.n_threads == 1 or len(self.encoded) < 2 * self.n_threads:
            nll, exp_e, exp_t = self._chunk(w_e, w_t, self.encoded)
        else:
            step = -(-len(self.encoded) // self.n_threads)
            chunks = [self.encoded[i : i + step] for i in range(0, len(self.encoded), step)]
            with ThreadPoolExecutor(max_workers=self.n_threads) as pool:
                parts = list(pool.map(lambda c: self._chunk(w_e, w_t, c), chunks))
            nll = 0.0
            exp_e = np.zeros((self.F, self.L))
            exp_t = np.zeros((self.L, self.L))
            for p_nll, p_e, p_t in parts:  # fixed reduction order
                nll += p_nll
                exp_e += p_e
                exp_t += p_t
        grad = np.concatenate([(exp_e - self._emp_e).ravel(), (exp_t - self._emp_t).ravel()])
        if self.l2 > 0.0:
            nll += 0.5 * self.l2 * float(np.dot(x, x))
            grad += self.l2 * x
        return nll, grad


def train(
    train_data: Sequence[tuple[Sequence[FeatureVector], Sequence[str]]],
    feature_index: FeatureIndex,
    labels: Sequence[str],
    template: FeatureTemplate,
    config: TrainConfig = TrainConfig(),
    on_iteration: Callable[[int, float, CrfModel], None] | None = None,
    n_threads: int = 1,
) -> CrfModel:
    """Fit weights by minimizing NLL + l1*|w| + (l2/2)*w^2 from a zero
    start. Raises TrainingDivergedError if the objective turns non-finite.

    on_iteration(iteration, objective, model) fires after every accepted
    optimizer step with a read-only view of the current weights; copy them
    if you want a snapshot.
    """
    if not train_data:
        raise ValueError("training data is empty")
    labels = tuple(labels)
    ids = {lab: i for i, lab in enumerate(labels)}
    if len(ids) != len(labels):
        raise ValueError("labels must be distinct")
    encoded = [_encode_sentence(f, g, feature_index, ids) for f, g in train_data]
    F, L = len(feature_index), len(labels)
    objective = _Objective(encoded, F, L, config.l2, n_threads=n_threads)

    def _view(x: np.ndarray) -> CrfModel:
        return CrfModel(
            labels=labels,
            feature_index=feature_index,
            emission=x[: F * L].reshape(F, L),
            transition=x[F * L :].reshape(L, L),
            template=template,
        )

    callback = None
    if on_iteration is not None:
        callback = lambda it, obj, x: on_iteration(it, obj, _view(x))

    result = minimize_owlqn(
        objective,
        np.zeros(F * L + L * L),
        l1=config.l1,
        max_iterations=config.max_iterations,
        memory=config.memory,
        tolerance=config.tolerance,
        callback=callback,
    )
    return CrfModel(
        labels=labels,
        feature_index=feature_index,
        emission=result.x[: F * L].reshape(F, L).copy(),
        transition=result.x[F * L :].reshape(L, L).copy(),
        template=template,
    )


# ---------------------------------------------------------------------------
# Model persistence. Text format:
#   line 1: PERTCRF v1 <template-token> <L> <F>
#   line 2: tab-separated labels
#   F lines: F<TAB><feature-string><TAB><w per label ...>
#   L lines: T<TAB><from-label><TAB><w per to-label ...>
# Weights are rendered as the shortest decimal string that round-trips.


def save_model(model: CrfModel) -> str:
    L = len(model.labels)
    F = len(model.feature_index)
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION} {model.template.token} {L} {F}",
        "\t".join(model.labels),
    ]
    for key, row in zip(model.feature_index.keys(), model.emission):
        lines.append("F\t" + key + "\t" + "\t".join(repr(float(w)) for w in row))
    for lab, row in zip(model.labels, model.transition):
        lines.append("T\t" + lab + "\t" + "\t".join(repr(float(w)) for w in row))
    return "\n".join(lines) + "\n"


def load_model(text: str) -> CrfModel:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ModelFormatError("empty model file")
    header = lines[0].split(" ")
    if len(header) != 5 or header[0] != MODEL_MAGIC:
        raise ModelFormatError("not a model file (bad header)")
    if header[1] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported version {header[1]!r}")
    try:
        template = FeatureTemplate.from_token(header[2])
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
    try:
        L, F = int(header[3]), int(header[4])
    except ValueError:
        raise ModelFormatError("malformed header counts") from None
    if len(lines) != 2 + F + L:
        raise ModelFormatError(f"truncated model file: expected {2 + F + L} lines, got {len(lines)}")
    labels = tuple(lines[1].split("\t"))
    if len(labels) != L:
        raise ModelFormatError(f"expected {L} labels, got {len(labels)}")

    def _row(line: str, lineno: int, kind: str) -> tuple[str, np.ndarray]:
        cols = line.split("\t")
        if len(cols) != 2 + L or cols[0] != kind:
            raise ModelFormatError(f"line {lineno}: malformed {kind} row")
        try:
            return cols[1], np.array([float(c) for c in cols[2:]])
        except ValueError:
            raise ModelFormatError(f"line {lineno}: bad weight value") from None

    feature_keys = []
    emission = np.zeros((F, L))
    for i in range(F):
        key, row = _row(lines[2 + i], 3 + i, "F")
        feature_keys.append(key)
        emission[i] = row
    transition = np.zeros((L, L))
    for i in range(L):
        lab, row = _row(lines[2 + F + i], 3 + F + i, "T")
        if lab != labels[i]:
            raise ModelFormatError(f"transition row {i} names {lab!r}, expected {labels[i]!r}")
        transition[i] = row
    try:
        index = FeatureIndex(feature_keys)
        return CrfModel(
            labels=labels,
            feature_index=index,
            emission=emission,
            transition=transition,
            template=template,
        )
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def save_model_file(model: CrfModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(save_model(model))


def load_model_file(path: str) -> CrfModel:
    with open(path, encoding="utf-8") as f:
        return load_model(f.read())
