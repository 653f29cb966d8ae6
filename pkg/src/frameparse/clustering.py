"""Unsupervised domain inference over averaged word embeddings.

Sentences are represented by the mean of their token-form embedding
vectors and grouped by K-means (kmeans++ seeding, Lloyd iterations,
Euclidean distance).  The fit is restarted several times and the run
with minimal intra-cluster inertia wins; cluster ids then serve as
pseudo-domain labels.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Sentence, TargetInstance
from .numerics import ShapeError


@dataclass(frozen=True)
class WordEmbeddings:
    """Form -> vector lookup with a reserved fallback row for unknowns."""

    index: Mapping[str, int]
    table: np.ndarray
    unk: int = 0

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def vector(self, form: str) -> np.ndarray:
        return self.table[self.index.get(form.lower(), self.unk)]


def load_word_embeddings(path) -> WordEmbeddings:
    """Text format: one `word v1 .. vd` line per vector; a `<unk>` row
    is prepended (zeros) when the file does not provide one."""
    words: list[str] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            words.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    if not rows:
        raise ValueError(f"{path}: empty embedding file")
    dim = len(rows[0])
    if any(len(r) != dim for r in rows):
        raise ValueError(f"{path}: inconsistent embedding dimensions")
    if "<unk>" in words:
        unk = words.index("<unk>")
        table = np.array(rows)
    else:
        unk = 0
        words = ["<unk>", *words]
        table = np.vstack([np.zeros(dim), np.array(rows)])
        words_shift = {w: i for i, w in enumerate(words)}
        return WordEmbeddings(words_shift, table, unk)
    return WordEmbeddings({w: i for i, w in enumerate(words)}, table, unk)


def sentence_embedding(sentence: Sentence, embeddings: WordEmbeddings) -> np.ndarray:
    """Arithmetic mean of the embedding vectors of all token forms."""
    if len(sentence) == 0:
        raise ValueError("cannot embed an empty sentence")
    acc = np.zeros(embeddings.dim)
    for tok in sentence.tokens:
        acc += embeddings.vector(tok.form)
    return acc / len(sentence)


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray  # (K, d)
    inertia: float
    seed: int
    restart_inertias: tuple[float, ...] = ()
    inertia_traces: tuple[tuple[float, ...], ...] = ()
    assignments: tuple[int, ...] = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (N, K) squared Euclidean distances
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            remaining = [i for i in range(n) if i not in chosen]
            chosen.append(int(rng.choice(remaining)))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, np.sum((points - points[chosen[-1]]) ** 2, axis=1))
    return points[chosen].copy()


def _lloyd(
    points: np.ndarray, centroids: np.ndarray, max_iter: int = 300
) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    assign = None
    trace: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_dists(points, centroids)
        new_assign = d2.argmin(axis=1)  # ties -> lowest index
        inertia = float(d2[np.arange(points.shape[0]), new_assign].sum())
        trace.append(inertia)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(centroids.shape[0]):
            members = points[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                # re-seed an empty cluster at the globally worst-fit point
                worst = int(d2[np.arange(points.shape[0]), assign].argmax())
                centroids[c] = points[worst]
    d2 = _sq_dists(points, centroids)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(points.shape[0]), assign].sum())
    return centroids, assign, inertia, trace


def kmeans_fit(
    vectors: np.ndarray | Sequence[np.ndarray],
    k: int,
    restarts: int = 10,
    seed: int = 0,
    threads: int = 1,
) -> ClusterModel:
    """Best-of-N-restarts K-means.

    Each restart draws its own sub-seed from (seed, restart index), so
    the result is deterministic and independent of restart scheduling;
    the restart with minimal inertia is returned.
    """
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"expected (N, d) vectors, got shape {points.shape}")
    if k < 1:
        raise ValueError("k must be at least 1")
    distinct = np.unique(points, axis=0).shape[0]
    if distinct < k:
        raise ValueError(f"only {distinct} distinct vectors for k={k}")

    def run(restart: int):
        rng = np.random.default_rng([int(seed), 29, restart])
        init = _kmeans_pp(points, k, rng)
        return _lloyd(points, init)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(r) for r in range(restarts)]
    best = min(range(restarts), key=lambda r: results[r][2])
    centroids, assign, inertia, _ = results[best]
    return ClusterModel(
        centroids=centroids,
        inertia=inertia,
        seed=int(seed),
        restart_inertias=tuple(r[2] for r in results),
        inertia_traces=tuple(tuple(r[3]) for r in results),
        assignments=tuple(int(a) for a in assign),
    )


def assign(model: ClusterModel, vector: np.ndarray) -> int:
    """Index of the nearest centroid; ties break to the lowest index."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (model.centroids.shape[1],):
        raise ShapeError(
            f"vector of dim {vector.shape} against centroids of dim "
            f"{model.centroids.shape[1]}"
        )
    return int(np.sum((model.centroids - vector) ** 2, axis=1).argmin())


def label_corpus(
    instances: Sequence[TargetInstance],
    model: ClusterModel,
    embeddings: WordEmbeddings,
) -> None:
    """Fill every instance's domain_label with its sentence's cluster.

    Idempotent; instances sharing a sentence share the label.
    """
    cache: dict[int, int] = {}
    for inst in instances:
        key = id(inst.sentence)
        if key not in cache:
            cache[key] = assign(model, sentence_embedding(inst.sentence, embeddings))
        inst.domain_label = cache[key]


def save_cluster_model(path, model: ClusterModel) -> None:
    """Text header `K d seed inertia` then one centroid per line."""
    with open(path, "w", encoding="utf-8") as fh:
        k, d = model.centroids.shape
        fh.write(f"{k} {d} {model.seed} {float(model.inertia)!r}\n")
        for row in model.centroids:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_cluster_model(path) -> ClusterModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError(f"{path}: bad cluster model header")
        k, d = int(header[0]), int(header[1])
        seed, inertia = int(header[2]), float(header[3])
        rows = [np.array([float(v) for v in fh.readline().split()]) for _ in range(k)]
    centroids = np.vstack(rows)
    if centroids.shape != (k, d):
        raise ValueError(f"{path}: centroid block does not match header")
    return ClusterModel(centroids=centroids, inertia=inertia, seed=seed)
