"""Independent reference implementations used only by tests.

Everything here enumerates label sequences exhaustively or perturbs inputs
numerically; none of it shares code with the package's inference or
training paths.
"""

import itertools

import numpy as np


def all_sequences(T: int, L: int) -> np.ndarray:
    return np.array(list(itertools.product(range(L), repeat=T)), dtype=np.int64)


def path_scores(em: np.ndarray, trans: np.ndarray, seqs: np.ndarray) -> np.ndarray:
    """Score every sequence, accumulating left to right in the same
    operation order as the dynamic program: ((s + transition) + emission)."""
    T = em.shape[0]
    scores = em[0][seqs[:, 0]].astype(np.float64)
    for t in range(1, T):
        scores = (scores + trans[seqs[:, t - 1], seqs[:, t]]) + em[t][seqs[:, t]]
    return scores


def brute_log_z(em: np.ndarray, trans: np.ndarray) -> float:
    scores = path_scores(em, trans, all_sequences(em.shape[0], em.shape[1]))
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_posteriors(em: np.ndarray, trans: np.ndarray):
    """(unary (T,L), pairwise (T-1,L,L)) marginals by full enumeration."""
    T, L = em.shape
    seqs = all_sequences(T, L)
    scores = path_scores(em, trans, seqs)
    w = np.exp(scores - scores.max())
    w /= w.sum()
    unary = np.zeros((T, L))
    for t in range(T):
        for y in range(L):
            unary[t, y] = w[seqs[:, t] == y].sum()
    pairwise = np.zeros((max(T - 1, 0), L, L))
    for t in range(T - 1):
        for i in range(L):
            for j in range(L):
                pairwise[t, i, j] = w[(seqs[:, t] == i) & (seqs[:, t + 1] == j)].sum()
    return unary, pairwise


def brute_viterbi(em: np.ndarray, trans: np.ndarray):
    """Exhaustive argmax. Among max-scoring sequences, picks the one whose
    reversed tuple is lexicographically smallest, which reproduces a
    backtrace that prefers the lower label index at every step."""
    seqs = all_sequences(em.shape[0], em.shape[1])
    scores = path_scores(em, trans, seqs)
    best = scores.max()
    candidates = seqs[scores == best]
    pick = min(range(len(candidates)), key=lambda i: tuple(candidates[i][::-1]))
    return list(int(v) for v in candidates[pick]), float(best)


def central_differences(fun, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Gradient of fun (scalar-valued) by central finite differences."""
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp.flat[i] += step
        xm = x.copy()
        xm.flat[i] -= step
        g.flat[i] = (fun(xp) - fun(xm)) / (2 * step)
    return g
