"""Leave-one-out kernel posterior estimation and the Bayes error estimate.

For each sample the posterior over classes is a kernel-weighted vote of
all other samples (a Nadaraya-Watson style local average; the sample
itself never votes). The Bayes error estimate is one minus the mean of
the per-sample maximum posterior. A naive exact-match frequency
posterior is included as a contrast baseline; it is undefined off the
sample support, which is the failure mode the kernel estimator removes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .core import LabeledDataset, PosteriorMatrix, SimilarityKernel

# Target element count per row chunk of the n x n similarity pass.
# Caps transient memory; chunk boundaries never change the per-row
# arithmetic, so results are identical for any chunk or thread count.
_CHUNK_ELEMENTS = 4_000_000


class UndefinedPosteriorError(ValueError):
    """The exact-match frequency posterior has no support at the query."""


@dataclass(frozen=True)
class BayesErrorEstimate:
    """Estimated Bayes error together with its per-sample evidence.

    ``value`` equals 1 - mean(per_sample_max_posterior) and lies in
    [0, 1 - 1/K]. ``fallback_rows`` propagates the uniform-fallback
    diagnostic from the posterior computation.
    """

    value: float
    per_sample_max_posterior: np.ndarray
    fallback_rows: tuple = ()

    def __post_init__(self) -> None:
        pmax = np.array(self.per_sample_max_posterior, dtype=np.float64)
        if pmax.ndim != 1 or pmax.size == 0:
            raise ValueError("per_sample_max_posterior must be a non-empty vector")
        if pmax.min() < -1e-12 or pmax.max() > 1.0 + 1e-12:
            raise ValueError("max posteriors must lie in [0, 1]")
        value = float(self.value)
        if abs(value - (1.0 - pmax.mean())) > 1e-12:
            raise ValueError("value inconsistent with per-sample posteriors")
        pmax.setflags(write=False)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "per_sample_max_posterior", pmax)
        object.__setattr__(self, "fallback_rows", tuple(int(i) for i in self.fallback_rows))


def gaussian_similarity(a, b, bandwidth: float) -> float:
    """Gaussian similarity exp(-||a - b||^2 / (2 bandwidth^2)) of two vectors.

    Symmetric in (a, b), in (0, 1], and exactly 1 when a equals b.
    """
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    if not (np.all(np.isfinite(av)) and np.all(np.isfinite(bv))):
        raise ValueError("inputs must be finite")
    bw = float(bandwidth)
    if not np.isfinite(bw) or bw <= 0:
        raise ValueError(f"bandwidth must be a positive finite real, got {bw}")
    diff = av - bv
    return float(np.exp(-(diff * diff).sum() / (2.0 * bw * bw)))


def _row_spans(n: int, d: int) -> list:
    chunk = max(1, _CHUNK_ELEMENTS // max(1, n * d))
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def _similarity_matrix(points: np.ndarray, bandwidth: float, threads: int = 1) -> np.ndarray:
    """Dense n x n Gaussian similarity matrix.

    Computed row-block by row-block with a fixed per-row reduction
    order, so the result is bit-identical for any thread count.
    """
    n, d = points.shape
    out = np.empty((n, n))
    scale = 2.0 * bandwidth * bandwidth

    def fill(span) -> None:
        lo, hi = span
        diff = points[lo:hi, None, :] - points[None, :, :]
        sq = (diff * diff).sum(axis=2)
        np.exp(-sq / scale, out=out[lo:hi])

    spans = _row_spans(n, d)
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            list(pool.map(fill, spans))
    else:
        for span in spans:
            fill(span)
    return out


def estimate_posteriors(
    data: LabeledDataset, kernel: SimilarityKernel, threads: int = 1
) -> PosteriorMatrix:
    """Leave-one-out kernel posteriors for every sample.

    Row i, column c is sum_{j != i} [y_j = c] s(x_j, x_i) divided by
    sum_{k != i} s(x_k, x_i). A row whose similarity mass underflows to
    zero is replaced by the uniform distribution and reported through
    ``fallback_rows``.

    Parameters
    ----------
    data : LabeledDataset
    kernel : SimilarityKernel
    threads : int
        Worker threads for the similarity pass. Output does not depend
        on this value.
    """
    n = data.n
    k = data.num_classes
    sims = _similarity_matrix(data.points, kernel.bandwidth, threads)
    np.fill_diagonal(sims, 0.0)
    num = np.empty((n, k))
    for c in range(k):
        num[:, c] = (sims * (data.labels == c)).sum(axis=1)
    den = num.sum(axis=1)
    ok = den > 0.0
    values = np.full((n, k), 1.0 / k)
    values[ok] = num[ok] / den[ok, None]
    fallback = tuple(int(i) for i in np.flatnonzero(~ok))
    return PosteriorMatrix(values, fallback_rows=fallback)


def estimate_bayes_error(
    data: LabeledDataset, kernel: SimilarityKernel, threads: int = 1
) -> BayesErrorEstimate:
    """Bayes error estimate 1 - (1/n) sum_i max_c p(y=c | x_i).

    Propagates the uniform-fallback diagnostic of the posterior pass.
    """
    posteriors = estimate_posteriors(data, kernel, threads)
    pmax = posteriors.values.max(axis=1)
    value = float(1.0 - pmax.mean())
    return BayesErrorEstimate(
        value=value,
        per_sample_max_posterior=pmax,
        fallback_rows=posteriors.fallback_rows,
    )


def naive_posterior(data: LabeledDataset, query) -> np.ndarray:
    """Exact-match frequency posterior at ``query``.

    Counts, among samples whose coordinates equal the query exactly,
    the frequency of every class. Raises UndefinedPosteriorError when
    no sample matches, which is the inherent gap of this baseline.
    """
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape != (data.d,):
        raise ValueError(f"query shape {q.shape} does not match d={data.d}")
    matches = np.all(data.points == q, axis=1)
    total = int(matches.sum())
    if total == 0:
        raise UndefinedPosteriorError(
            "no sample coincides with the query point; the frequency "
            "posterior is undefined there"
        )
    counts = np.bincount(data.labels[matches], minlength=data.num_classes)
    return counts / total


def median_heuristic_bandwidth(data: LabeledDataset) -> float:
    """Median of all pairwise Euclidean distances, the default bandwidth.

    Scale-adaptive and deterministic. Requires at least one distinct
    pair; a zero median would not be a valid bandwidth.
    """
    dists = pdist(data.points)
    med = float(np.median(dists))
    if med <= 0.0:
        raise ValueError(
            "median pairwise distance is zero; bandwidth must be chosen "
            "explicitly for data with many coincident points"
        )
    return med
