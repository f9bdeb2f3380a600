"""String-keyed indicator features for the two window templates.

Key grammar (bit-stable across versions):
  w[-5]=... w[5]=...    word identity in a +-5 window, with sentinel forms
                        __BOS__ / __EOS__ outside the sentence
  pre1=..pre3= suf1=..suf3=
                        focus-word affixes by Unicode scalar count, omitted
                        when the form is strictly shorter than the affix
  BOS / EOS             boundary booleans, emitted only when true
  ez[-5]=0|1 ez[5]=...  predicted-ezafe window, sentinel value _
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .corpus import Corpus

TEMPLATE_IDS = ("CRF1", "CRF2")
WINDOW = 5
BOS_FORM = "__BOS__"
EOS_FORM = "__EOS__"
EZ_PAD = "_"


@dataclass(frozen=True)
class FeatureTemplate:
    id: str
    window: int = WINDOW
    ezafe_input: bool = False

    def __post_init__(self):
        if self.id not in TEMPLATE_IDS:
            raise ValueError(f"unknown template id {self.id!r}; expected one of {TEMPLATE_IDS}")
        if self.window != WINDOW:
            raise ValueError(f"window radius is fixed at {WINDOW}")

    @property
    def token(self) -> str:
        """Template identifier used in model files, e.g. 'CRF2+EZ'."""
        return self.id + "+EZ" if self.ezafe_input else self.id

    @staticmethod
    def from_token(token: str) -> "FeatureTemplate":
        base, plus, suffix = token.partition("+")
        if base not in TEMPLATE_IDS or (plus and suffix != "EZ"):
            raise ValueError(f"unknown template token {token!r}")
        return FeatureTemplate(id=base, ezafe_input=bool(plus))


# A feature vector is a list of distinct key strings in deterministic
# emission order; an ezafe annotation is one 0/1 flag per token.
FeatureVector = list[str]
EzafeAnnotation = Sequence[int]


def check_annotation(flags: EzafeAnnotation, n_tokens: int) -> None:
    if len(flags) != n_tokens:
        raise ValueError(f"ezafe annotation length {len(flags)} != sentence length {n_tokens}")
    for v in flags:
        if v not in (0, 1):
            raise ValueError(f"ezafe flags must be 0 or 1, got {v!r}")


def extract_features(
    forms: Sequence[str],
    position: int,
    template: FeatureTemplate,
    ezafe: EzafeAnnotation | None = None,
) -> FeatureVector:
    """Features active at one token position of a sentence (given as its
    surface forms)."""
    n = len(forms)
    if not 0 <= position < n:
        raise ValueError(f"position {position} out of range for sentence of length {n}")
    if template.ezafe_input:
        if ezafe is None:
            raise ValueError("template requires an ezafe annotation")
        if len(ezafe) != n:
            raise ValueError(f"ezafe annotation length {len(ezafe)} != sentence length {n}")
    elif ezafe is not None:
        raise ValueError("template does not take an ezafe annotation")

    keys: FeatureVector = []
    for k in range(-WINDOW, WINDOW + 1):
        j = position + k
        if j < 0:
            form = BOS_FORM
        elif j >= n:
            form = EOS_FORM
        else:
            form = forms[j]
        keys.append(f"w[{k}]={form}")

    if template.id == "CRF2":
        focus = forms[position]
        for ln in (1, 2, 3):
            if len(focus) >= ln:
                keys.append(f"pre{ln}={focus[:ln]}")
        for ln in (1, 2, 3):
            if len(focus) >= ln:
                keys.append(f"suf{ln}={focus[-ln:]}")
        if position == 0:
            keys.append("BOS")
        if position == n - 1:
            keys.append("EOS")

    if template.ezafe_input:
        assert ezafe is not None
        for k in range(-WINDOW, WINDOW + 1):
            j = position + k
            value = EZ_PAD if j < 0 or j >= n else str(ezafe[j])
            keys.append(f"ez[{k}]={value}")
    return keys


def sentence_features(
    forms: Sequence[str],
    template: FeatureTemplate,
    ezafe: EzafeAnnotation | None = None,
) -> list[FeatureVector]:
    return [extract_features(forms, i, template, ezafe) for i in range(len(forms))]


class FeatureIndex:
    """Immutable bijection between retained feature strings and 0..F-1,
    assigned in first-occurrence order. Unknown strings map to nothing."""

    def __init__(self, keys: Iterable[str]):
        index: dict[str, int] = {}
        for key in keys:
            if key in index:
                raise ValueError(f"duplicate feature string {key!r}")
            index[key] = len(index)
        self._index = index

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def __getitem__(self, key: str) -> int:
        return self._index[key]

    def get(self, key: str) -> int | None:
        return self._index.get(key)

    def keys(self) -> Iterator[str]:
        return iter(self._index)

    def encode(self, keys: Sequence[str]) -> list[int]:
        """Indices of the known features among keys, in emission order."""
        idx = self._index
        return [idx[k] for k in keys if k in idx]


def build_feature_index(
    corpus: Corpus,
    template: FeatureTemplate,
    min_count: int = 1,
    ezafe: Sequence[EzafeAnnotation] | None = None,
) -> FeatureIndex:
    """Scan the corpus once and index every feature string occurring at
    least min_count times, in first-occurrence order.

    For ezafe-input templates, ezafe must supply one annotation per
    sentence.
    """
    if corpus.n_sentences == 0:
        raise ValueError("cannot index an empty corpus")
    if template.ezafe_input:
        if ezafe is None or len(ezafe) != corpus.n_sentences:
            raise ValueError("ezafe-input template needs one annotation per sentence")
    counts: dict[str, int] = {}
    for s, sent in enumerate(corpus.sentences):
        forms = [t.form for t in sent]
        flags = ezafe[s] if template.ezafe_input else None
        for i in range(len(forms)):
            for key in extract_features(forms, i, template, flags):
                counts[key] = counts.get(key, 0) + 1
    return FeatureIndex(k for k, c in counts.items() if c >= min_count)
