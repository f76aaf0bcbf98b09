"""Turning per-class text documents into feature vectors.

Pipeline: tokenize (lowercase alphanumerics, stop words dropped),
tf-idf over the corpus vocabulary, then a clustered latent-semantic
reduction — documents are grouped by spherical k-means and each
cluster contributes a truncated-SVD basis; the concatenated bases give
one linear projection.  With a single cluster this is plain LSI.

Word-embedding support (load + per-document term bags) feeds the
distributional-semantic kernel in :mod:`zeroshot.kernels`.
"""

from __future__ import annotations

import re
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import FeaturizationError
from .kernels import TermBag

# Snowball English stop-word list.
STOP_WORDS = frozenset("""
i me my myself we our ours ourselves you your yours yourself yourselves he him
his himself she her hers herself it its itself they them their theirs
themselves what which who whom this that these those am is are was were be
been being have has had having do does did doing a an the and but if or
because as until while of at by for with about against between into through
during before after above below to from up down in out on off over under
again further then once here there when where why how all any both each few
more most other some such no nor not only own same so than too very s t can
will just don should now
""".split())

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text):
    """Lowercase alphanumeric tokens with stop words removed."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in STOP_WORDS]


@dataclass
class TfIdfVector:
    """Dense tf-idf weights over a shared corpus vocabulary.

    ``vocabulary`` (term -> column) and ``idf`` are shared references
    across all vectors from one corpus.
    """

    weights: np.ndarray
    vocabulary: dict
    idf: np.ndarray


def tfidf(corpus):
    """Per-class tf-idf vectors: (count / doc length) * ln(N / df).

    Document length counts the tokens that survive stop-word removal.
    Returns a map class id -> :class:`TfIdfVector` over the shared
    sorted vocabulary.
    """
    class_ids = corpus.class_ids
    tokens = {}
    for cid in class_ids:
        toks = tokenize(corpus.document(cid))
        if not toks:
            raise FeaturizationError(
                f"document for class {cid} is empty after tokenization"
            )
        tokens[cid] = toks
    vocab_terms = sorted(set(t for toks in tokens.values() for t in toks))
    vocabulary = {term: i for i, term in enumerate(vocab_terms)}
    df = np.zeros(len(vocabulary))
    for toks in tokens.values():
        for term in set(toks):
            df[vocabulary[term]] += 1
    idf = np.log(len(class_ids) / df)
    vectors = {}
    for cid in class_ids:
        counts = Counter(tokens[cid])
        w = np.zeros(len(vocabulary))
        total = len(tokens[cid])
        for term, count in counts.items():
            j = vocabulary[term]
            w[j] = (count / total) * idf[j]
        vectors[cid] = TfIdfVector(weights=w, vocabulary=vocabulary, idf=idf)
    return vectors


def _spherical_kmeans(rows, n_clusters, max_iter=100):
    """Deterministic cosine k-means; returns an assignment per row.

    Rows are unit-normalized; centroids start from rows evenly spaced
    in index order.  Ties break toward the lowest cluster index, and an
    emptied cluster is reseeded with the worst-fit row.
    """
    n = len(rows)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    X = rows / norms
    seed_idx = np.unique(np.round(np.linspace(0, n - 1, n_clusters)).astype(int))
    while len(seed_idx) < n_clusters:  # duplicates collapse only when n is tiny
        extra = next(i for i in range(n) if i not in set(seed_idx))
        seed_idx = np.sort(np.append(seed_idx, extra))
    centroids = X[seed_idx].copy()
    assign = np.full(n, -1)
    for _ in range(max_iter):
        sims = X @ centroids.T
        new_assign = np.argmax(sims, axis=1)  # argmax takes the lowest index on ties
        for k in range(n_clusters):
            if not np.any(new_assign == k):
                worst = int(np.argmin(np.max(sims, axis=1)))
                new_assign[worst] = k
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for k in range(n_clusters):
            mean = X[assign == k].mean(axis=0)
            norm = np.linalg.norm(mean)
            centroids[k] = mean / norm if norm > 0 else mean
    return assign


@dataclass
class TextFeatures:
    """Reduced per-class text vectors plus the fitted linear projection.

    ``projection`` maps a vocabulary-sized tf-idf vector to the reduced
    space (columns are concatenated per-cluster SVD bases), so that
    transform(x) = x @ projection is linear and reproduces
    ``class_vectors`` on the training documents.
    """

    class_vectors: dict
    projection: np.ndarray
    vocabulary: dict
    idf: np.ndarray
    n_clusters: int
    cluster_of_class: dict

    @property
    def dimension(self):
        return self.projection.shape[1]

    def matrix(self, class_ids=None):
        """Class vectors stacked in sorted-id (or given) order."""
        ids = sorted(self.class_vectors) if class_ids is None else list(class_ids)
        return np.stack([self.class_vectors[c] for c in ids])

    def transform_weights(self, weights):
        """Project a vocabulary-sized tf-idf weight vector."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape[-1] != self.projection.shape[0]:
            raise FeaturizationError(
                f"weight vector has {weights.shape[-1]} terms, vocabulary has "
                f"{self.projection.shape[0]}"
            )
        return weights @ self.projection

    def transform_document(self, text):
        """Featurize an out-of-sample document with the stored vocabulary/idf.

        Token counts are normalized by the full post-stop-word token
        count; terms outside the training vocabulary are dropped.
        """
        toks = tokenize(text)
        if not toks:
            raise FeaturizationError("document is empty after tokenization")
        counts = Counter(toks)
        w = np.zeros(len(self.vocabulary))
        total = len(toks)
        for term, count in counts.items():
            j = self.vocabulary.get(term)
            if j is not None:
                w[j] = (count / total) * self.idf[j]
        return w @ self.projection


def _allocate_ranks(sizes, caps, target_dim):
    """Largest-remainder split of target_dim, respecting per-cluster caps."""
    sizes = np.asarray(sizes, dtype=float)
    caps = np.asarray(caps, dtype=int)
    if caps.sum() < target_dim:
        raise FeaturizationError(
            f"clusters can support at most {caps.sum()} dimensions, "
            f"asked for {target_dim}"
        )
    quota = target_dim * sizes / sizes.sum()
    ranks = np.minimum(np.floor(quota).astype(int), caps)
    while ranks.sum() < target_dim:
        room = caps - ranks
        frac = np.where(room > 0, quota - ranks, -np.inf)
        ranks[int(np.argmax(frac))] += 1
    return ranks


def fit_reducer(vectors, target_dim=None, n_clusters=1):
    """Fit the clustered-LSI projection on per-class tf-idf vectors.

    target_dim defaults to the number of documents.  Requires
    1 <= n_clusters <= n_docs and target_dim <= min(n_docs, vocabulary
    size) so every requested dimension is spanned.
    """
    if not vectors:
        raise FeaturizationError("no tf-idf vectors to reduce")
    class_ids = sorted(vectors)
    first = vectors[class_ids[0]]
    vocabulary = first.vocabulary
    idf = first.idf
    for cid in class_ids:
        if vectors[cid].vocabulary is not vocabulary and vectors[cid].vocabulary != vocabulary:
            raise FeaturizationError("tf-idf vectors come from different vocabularies")
    X = np.stack([vectors[cid].weights for cid in class_ids])
    n_docs, n_vocab = X.shape
    if target_dim is None:
        target_dim = n_docs
    if not (1 <= target_dim <= min(n_docs, n_vocab)):
        raise FeaturizationError(
            f"target_dim must be in [1, {min(n_docs, n_vocab)}], got {target_dim}"
        )
    if not (1 <= n_clusters <= n_docs):
        raise FeaturizationError(
            f"n_clusters must be in [1, {n_docs}], got {n_clusters}"
        )

    assign = (np.zeros(n_docs, dtype=int) if n_clusters == 1
              else _spherical_kmeans(X, n_clusters))
    sizes = [int(np.sum(assign == k)) for k in range(n_clusters)]
    caps = [min(s, n_vocab) for s in sizes]
    ranks = _allocate_ranks(sizes, caps, target_dim)

    bases = []
    for k in range(n_clusters):
        rows = X[assign == k]
        # right singular vectors of the cluster block, truncated
        _, _, vt = np.linalg.svd(rows, full_matrices=False)
        bases.append(vt[: ranks[k]].T)
    projection = np.hstack(bases)

    reduced = X @ projection
    class_vectors = {cid: reduced[i] for i, cid in enumerate(class_ids)}
    cluster_of_class = {cid: int(assign[i]) for i, cid in enumerate(class_ids)}
    return TextFeatures(class_vectors=class_vectors, projection=projection,
                        vocabulary=vocabulary, idf=idf, n_clusters=n_clusters,
                        cluster_of_class=cluster_of_class)


@dataclass
class EmbeddingTable:
    """Unit-normalized word embeddings with a word -> row lookup."""

    index: dict
    vectors: np.ndarray

    @property
    def dimension(self):
        return self.vectors.shape[1]

    def lookup(self, word):
        row = self.index.get(word)
        return None if row is None else self.vectors[row]


def load_embeddings(path):
    """Read text-format embeddings: a "count dim" header, then one
    "word v1 ... vK" line per word.

    Malformed lines raise a featurization error naming the line number;
    duplicate words warn and keep the last occurrence.  Vectors are
    unit-normalized on load.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FeaturizationError(f"cannot read embeddings {path}: {exc}") from exc
    if not lines:
        raise FeaturizationError(f"{path}: empty embeddings file")
    head = lines[0].split()
    if len(head) != 2:
        raise FeaturizationError(f"{path}:1: header must be 'count dim'")
    try:
        count, dim = int(head[0]), int(head[1])
    except ValueError:
        raise FeaturizationError(f"{path}:1: header must be two integers") from None
    if count < 1 or dim < 1:
        raise FeaturizationError(f"{path}:1: count and dim must be positive")
    index = {}
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim + 1:
            raise FeaturizationError(
                f"{path}:{lineno}: expected a word and {dim} floats, got "
                f"{len(parts)} fields"
            )
        word = parts[0]
        try:
            vec = np.array([float(p) for p in parts[1:]])
        except ValueError:
            raise FeaturizationError(f"{path}:{lineno}: non-numeric embedding value") from None
        norm = np.linalg.norm(vec)
        if norm <= 1e-12:
            raise FeaturizationError(f"{path}:{lineno}: zero embedding for {word!r}")
        vec = vec / norm
        if word in index:
            warnings.warn(f"{path}:{lineno}: duplicate embedding for {word!r}; keeping last")
            rows[index[word]] = vec
        else:
            index[word] = len(rows)
            rows.append(vec)
    if len(rows) != count:
        warnings.warn(f"{path}: header says {count} words, found {len(rows)}")
    return EmbeddingTable(index=index, vectors=np.stack(rows))


def bag_of_triplets(text, table):
    """Represent a document as (word, relative freq, embedding) triplets.

    Stop words are removed before counting; frequencies are counts over
    the full post-stop-word token count, and words without an embedding
    are dropped from the bag (but still counted in the denominator).
    Entries are sorted by word for determinism.
    """
    toks = tokenize(text)
    if not toks:
        raise FeaturizationError("document is empty after tokenization")
    total = len(toks)
    counts = Counter(toks)
    words, freqs, vecs = [], [], []
    for word in sorted(counts):
        vec = table.lookup(word)
        if vec is None:
            continue
        words.append(word)
        freqs.append(counts[word] / total)
        vecs.append(vec)
    if not words:
        raise FeaturizationError("no embeddable terms in document")
    return TermBag(words=words, freqs=np.array(freqs), vectors=np.stack(vecs))
