import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from pertcrf.corpus import Corpus, Token

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# Forms must be non-empty and whitespace-free; mix Latin and Persian script.
_FORM_ALPHABET = "abcdefghابپتمنی."
_TAGS = ("N", "ADJ", "V", "P", "DELM")

forms = st.text(alphabet=_FORM_ALPHABET, min_size=1, max_size=6)
tokens = st.builds(
    Token,
    form=forms,
    pos=st.sampled_from(_TAGS),
    ezafe=st.integers(min_value=0, max_value=1),
)
sentences = st.lists(tokens, min_size=1, max_size=8).map(tuple)


@st.composite
def corpora(draw, min_sentences=1, max_sentences=10):
    sents = draw(st.lists(sentences, min_size=min_sentences, max_size=max_sentences))
    return Corpus.from_sentences(sents)


@st.composite
def lattices(draw, max_len=6, max_labels=4):
    """Random small (emissions, transitions) pair via a seeded generator;
    scores span a few orders of magnitude to exercise the log-space path."""
    T = draw(st.integers(min_value=1, max_value=max_len))
    L = draw(st.integers(min_value=1, max_value=max_labels))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    rng = np.random.default_rng(seed)
    scale = draw(st.sampled_from([0.5, 2.0, 10.0]))
    em = rng.normal(0.0, scale, size=(T, L))
    trans = rng.normal(0.0, scale, size=(L, L))
    return em, trans
