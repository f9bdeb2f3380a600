"""Synthetic annotated corpora from a known hidden-Markov process, plus a
posterior-decoding oracle that upper-bounds any trained tagger on data from
the same process.

Ezafe flags are generated conditionally on (state, next state), so the flag
carries exactly the phrase-boundary signal that makes it informative for
tagging; the last token of a sentence never carries ezafe (there is no
following word to link to).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, Token
from .rng import SplitMix64, substream


class HmmSpecError(ValueError):
    pass


@dataclass(frozen=True)
class GeometricLength:
    """Truncated geometric sentence-length law: from min_len, keep extending
    with continue_prob until max_len."""

    min_len: int = 3
    max_len: int = 40
    continue_prob: float = 0.85

    def __post_init__(self):
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if not 0.0 <= self.continue_prob < 1.0:
            raise ValueError("continue_prob must lie in [0, 1)")

    def sample(self, rng: SplitMix64) -> int:
        n = self.min_len
        while n < self.max_len and rng.random() < self.continue_prob:
            n += 1
        return n

    def pmf(self) -> np.ndarray:
        """Probabilities for lengths min_len..max_len (inclusive)."""
        q = self.continue_prob
        span = self.max_len - self.min_len
        p = np.array([(1 - q) * q**k for k in range(span + 1)])
        p[-1] = q**span  # truncation lumps the tail at max_len
        return p


def _check_row(section: str, row_name: str, row: np.ndarray, stochastic: bool) -> None:
    if np.any(row < 0) or np.any(row > 1):
        raise HmmSpecError(f"{section} row {row_name!r} has entries outside [0, 1]")
    if stochastic and abs(float(row.sum()) - 1.0) > 1e-12:
        raise HmmSpecError(f"{section} row {row_name!r} sums to {float(row.sum())!r}, not 1")


@dataclass(frozen=True)
class HmmSpec:
    states: tuple[str, ...]
    vocab: tuple[str, ...]
    start: np.ndarray  # (L,)
    trans: np.ndarray  # (L, L) row-stochastic
    emit: np.ndarray  # (L, V) row-stochastic
    ezafe_rule: np.ndarray  # (L, L) P(ezafe=1 | state, next state)

    def __post_init__(self):
        L, V = len(self.states), len(self.vocab)
        if L == 0 or len(set(self.states)) != L:
            raise HmmSpecError("states must be non-empty and distinct")
        if V == 0 or len(set(self.vocab)) != V:
            raise HmmSpecError("vocab must be non-empty and distinct")
        if self.start.shape != (L,):
            raise HmmSpecError("START must have one entry per state")
        if self.trans.shape != (L, L) or self.emit.shape != (L, V):
            raise HmmSpecError("TRANS/EMIT dimensions do not match states/vocab")
        if self.ezafe_rule.shape != (L, L):
            raise HmmSpecError("EZAFE must be (states x states)")
        _check_row("START", "start", self.start, stochastic=True)
        for i, s in enumerate(self.states):
            _check_row("TRANS", s, self.trans[i], stochastic=True)
            _check_row("EMIT", s, self.emit[i], stochastic=True)
            _check_row("EZAFE", s, self.ezafe_rule[i], stochastic=False)

    def word_id(self, word: str) -> int:
        try:
            return self.vocab.index(word)
        except ValueError:
            raise ValueError(f"word {word!r} not in spec vocabulary") from None


def _sample_categorical(rng: SplitMix64, cumulative: np.ndarray) -> int:
    u = rng.random()
    i = int(np.searchsorted(cumulative, u, side="right"))
    return min(i, len(cumulative) - 1)


def generate(
    spec: HmmSpec,
    n_sentences: int,
    seed: int,
    length_dist: GeometricLength = GeometricLength(),
) -> Corpus:
    """Sample n_sentences independent sentences; deterministic under
    (seed, length_dist). Each sentence draws from its own substream, so
    prefixes of the corpus do not depend on n_sentences."""
    if n_sentences < 1:
        raise ValueError("n_sentences must be positive")
    cum_start = np.cumsum(spec.start)
    cum_trans = np.cumsum(spec.trans, axis=1)
    cum_emit = np.cumsum(spec.emit, axis=1)
    sentences = []
    for s in range(n_sentences):
        rng = substream(seed, s)
        n = length_dist.sample(rng)
        states = np.empty(n, dtype=np.int64)
        states[0] = _sample_categorical(rng, cum_start)
        for t in range(1, n):
            states[t] = _sample_categorical(rng, cum_trans[states[t - 1]])
        words = [spec.vocab[_sample_categorical(rng, cum_emit[states[t]])] for t in range(n)]
        flags = np.zeros(n, dtype=np.int64)
        for t in range(n - 1):
            p = spec.ezafe_rule[states[t], states[t + 1]]
            flags[t] = 1 if rng.random() < p else 0
        sentences.append(
            tuple(
                Token(form=words[t], pos=spec.states[states[t]], ezafe=int(flags[t]))
                for t in range(n)
            )
        )
    return Corpus.from_sentences(sentences)


def bayes_decode(spec: HmmSpec, words: Sequence[str]) -> list[str]:
    """Per-token argmax of posterior state marginals under the true process
    (posterior decoding); ties go to the lower state index."""
    if not words:
        raise ValueError("empty word sequence")
    obs = np.array([spec.word_id(w) for w in words])
    T, L = len(obs), len(spec.states)
    alphas = np.empty((T, L))
    a = spec.start * spec.emit[:, obs[0]]
    norm = a.sum()
    if norm <= 0:
        raise ValueError("sequence has zero probability under the spec")
    alphas[0] = a / norm
    for t in range(1, T):
        a = (alphas[t - 1] @ spec.trans) * spec.emit[:, obs[t]]
        norm = a.sum()
        if norm <= 0:
            raise ValueError("sequence has zero probability under the spec")
        alphas[t] = a / norm
    betas = np.empty((T, L))
    betas[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        b = spec.trans @ (spec.emit[:, obs[t + 1]] * betas[t + 1])
        betas[t] = b / b.sum()
    posterior = alphas * betas
    return [spec.states[int(posterior[t].argmax())] for t in range(T)]


def expected_ezafe_rate(spec: HmmSpec, length_dist: GeometricLength = GeometricLength()) -> float:
    """Analytic fraction of generated tokens carrying ezafe: expected flag
    count over expected sentence length under the length law."""
    pmf = length_dist.pmf()
    lengths = np.arange(length_dist.min_len, length_dist.max_len + 1)
    # r[t] = P(flag at position t is 1) for a long enough sentence
    r = np.empty(length_dist.max_len)
    p_t = spec.start.copy()
    for t in range(length_dist.max_len):
        r[t] = float(((p_t[:, None] * spec.trans) * spec.ezafe_rule).sum())
        p_t = p_t @ spec.trans
    cum_r = np.concatenate([[0.0], np.cumsum(r)])
    expected_flags = float(sum(pmf[i] * cum_r[n - 1] for i, n in enumerate(lengths)))
    expected_tokens = float(np.dot(pmf, lengths))
    return expected_flags / expected_tokens


# ---------------------------------------------------------------------------
# Plain-text spec files. Sections in order: STATES, START, TRANS, EMIT
# (first line of EMIT is the vocabulary), EZAFE. Values are whitespace
# separated; rows that should be stochastic are rejected when they are not.

_SECTIONS = ("STATES", "START", "TRANS", "EMIT", "EZAFE")


def write_hmm_spec(spec: HmmSpec) -> str:
    def row(values) -> str:
        return " ".join(repr(float(v)) for v in values)

    lines = ["STATES", " ".join(spec.states), "START", row(spec.start), "TRANS"]
    lines += [row(r) for r in spec.trans]
    lines += ["EMIT", " ".join(spec.vocab)]
    lines += [row(r) for r in spec.emit]
    lines += ["EZAFE"]
    lines += [row(r) for r in spec.ezafe_rule]
    return "\n".join(lines) + "\n"


def parse_hmm_spec(text: str) -> HmmSpec:
    lines = [ln.strip() for ln in text.split("\n")]
    lines = [ln for ln in lines if ln]
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for ln in lines:
        if ln in _SECTIONS:
            if ln in sections:
                raise HmmSpecError(f"duplicate section {ln}")
            current = ln
            sections[ln] = []
        elif current is None:
            raise HmmSpecError(f"content before first section: {ln!r}")
        else:
            sections[current].append(ln)
    missing = [s for s in _SECTIONS if s not in sections]
    if missing:
        raise HmmSpecError(f"missing sections: {', '.join(missing)}")

    def floats(ln: str, where: str) -> np.ndarray:
        try:
            return np.array([float(v) for v in ln.split()])
        except ValueError:
            raise HmmSpecError(f"{where}: bad number in {ln!r}") from None

    if len(sections["STATES"]) != 1:
        raise HmmSpecError("STATES must be a single line")
    states = tuple(sections["STATES"][0].split())
    L = len(states)
    if len(sections["START"]) != 1:
        raise HmmSpecError("START must be a single line")
    start = floats(sections["START"][0], "START")
    if len(sections["TRANS"]) != L:
        raise HmmSpecError(f"TRANS needs {L} rows, got {len(sections['TRANS'])}")
    trans = np.vstack([floats(ln, f"TRANS row {i}") for i, ln in enumerate(sections["TRANS"])])
    emit_lines = sections["EMIT"]
    if len(emit_lines) != L + 1:
        raise HmmSpecError(f"EMIT needs a vocabulary line plus {L} rows")
    vocab = tuple(emit_lines[0].split())
    emit = np.vstack([floats(ln, f"EMIT row {i}") for i, ln in enumerate(emit_lines[1:])])
    if len(sections["EZAFE"]) != L:
        raise HmmSpecError(f"EZAFE needs {L} rows, got {len(sections['EZAFE'])}")
    ezafe = np.vstack([floats(ln, f"EZAFE row {i}") for i, ln in enumerate(sections["EZAFE"])])
    return HmmSpec(
        states=states, vocab=vocab, start=start, trans=trans, emit=emit, ezafe_rule=ezafe
    )


def read_hmm_spec_file(path: str) -> HmmSpec:
    with open(path, encoding="utf-8") as f:
        return parse_hmm_spec(f.read())


def write_hmm_spec_file(spec: HmmSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(write_hmm_spec(spec))


# ---------------------------------------------------------------------------
# Ready-made specs used by the experiment scripts and the acceptance suite.


def _dirichlet1(rng: SplitMix64, n: int, skew: float = 1.0) -> np.ndarray:
    w = np.array([-math.log(1.0 - rng.random()) for _ in range(n)]) ** skew
    return w / w.sum()


def random_spec(
    n_states: int = 4,
    vocab_size: int = 200,
    seed: int = 0,
    self_bias: float = 0.3,
    emission_skew: float = 3.0,
    ezafe_prob: float = 0.85,
) -> HmmSpec:
    """Random stochastic process with moderately sticky transitions and
    skewed emissions, so states are learnable from words. The first third
    of the states accept ezafe with probability ezafe_prob."""
    rng = SplitMix64(seed)
    states = tuple(f"T{i}" for i in range(n_states))
    vocab = tuple(f"w{i:03d}" for i in range(vocab_size))
    start = _dirichlet1(rng, n_states)
    trans = np.vstack(
        [
            (1 - self_bias) * _dirichlet1(rng, n_states) + self_bias * np.eye(n_states)[i]
            for i in range(n_states)
        ]
    )
    emit = np.vstack([_dirichlet1(rng, vocab_size, emission_skew) for _ in range(n_states)])
    n_accepting = max(1, n_states // 3)
    ezafe = np.zeros((n_states, n_states))
    ezafe[:n_accepting, :] = ezafe_prob
    return HmmSpec(states=states, vocab=vocab, start=start, trans=trans, emit=emit, ezafe_rule=ezafe)


def tuned_ezafe_spec(
    target_rate: float = 0.22,
    n_states: int = 6,
    vocab_size: int = 300,
    seed: int = 11,
    length_dist: GeometricLength = GeometricLength(),
) -> HmmSpec:
    """Spec whose analytic ezafe rate equals target_rate and whose flags are
    nearly deterministic given (state, next state): accepting states link
    forward to modifier-like next states, so recognition hinges on the word
    window rather than a coin flip. A binary pair rule grows one next-state
    column at a time until it clears the target, then a single closed-form
    rescale hits the target exactly (the rate is linear in the rule)."""
    base = random_spec(
        n_states=n_states, vocab_size=vocab_size, seed=seed, emission_skew=5.0, ezafe_prob=1.0
    )

    def with_rule(rule: np.ndarray) -> HmmSpec:
        return HmmSpec(
            states=base.states,
            vocab=base.vocab,
            start=base.start,
            trans=base.trans,
            emit=base.emit,
            ezafe_rule=rule,
        )

    accepting = max(1, n_states // 3)
    rule = np.zeros((n_states, n_states))
    rate = 0.0
    for j in range(n_states):
        rule[:accepting, j] = 1.0
        rate = expected_ezafe_rate(with_rule(rule), length_dist)
        if rate >= target_rate:
            break
    if rate < target_rate:
        raise ValueError(f"target rate {target_rate} exceeds attainable rate {rate:.4f}")
    return with_rule(rule * (target_rate / rate))


def homograph_spec(seed: int = 5) -> HmmSpec:
    """Two states (H1, H2) share one emission distribution and identical
    incoming/outgoing transitions; they differ only in ezafe behavior. No
    tagger can separate them from words alone, while the ezafe flag makes
    them trivially separable: the construction behind the ezafe-helps-POS
    check."""
    rng = SplitMix64(seed)
    states = ("D", "H1", "H2", "V")
    d_words = tuple(f"d{i}" for i in range(5))
    h_words = tuple(f"h{i}" for i in range(12))
    v_words = tuple(f"v{i}" for i in range(8))
    vocab = d_words + h_words + v_words
    V = len(vocab)

    def emission(words: tuple[str, ...]) -> np.ndarray:
        row = np.zeros(V)
        weights = _dirichlet1(rng, len(words))
        for w, p in zip(words, weights):
            row[vocab.index(w)] = p
        return row

    e_d = emission(d_words)
    e_h = emission(h_words)  # shared by H1 and H2
    e_v = emission(v_words)
    emit = np.vstack([e_d, e_h, e_h.copy(), e_v])
    start = np.array([0.6, 0.1, 0.1, 0.2])
    trans = np.array(
        [
            [0.10, 0.45, 0.45, 0.00],  # D
            [0.30, 0.00, 0.00, 0.70],  # H1
            [0.30, 0.00, 0.00, 0.70],  # H2
            [0.60, 0.00, 0.00, 0.40],  # V
        ]
    )
    ezafe = np.zeros((4, 4))
    ezafe[1, :] = 1.0  # H1 always links forward; H2 never does
    return HmmSpec(states=states, vocab=vocab, start=start, trans=trans, emit=emit, ezafe_rule=ezafe)
