"""Filter importance rankings for the prunable CNN2D layers.

A ranking maps each prunable layer (``conv1``, ``conv2``, ``fc1``) to one
score per output filter/neuron. Higher scores are kept first; ties keep the
lower index first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..autograd import derive, no_grad
from ..models import ModelGraph

PRUNABLE = ("conv1", "conv2", "fc1")


@dataclass
class FilterRanking:
    scores: dict          # layer -> [width] scores
    criteria: dict        # layer -> criterion name used for that layer

    def __post_init__(self):
        for name, s in self.scores.items():
            s = np.asarray(s, dtype=np.float64)
            if not np.isfinite(s).all():
                raise ValueError(f"non-finite scores for {name}")
            self.scores[name] = s

    def order(self, layer: str) -> np.ndarray:
        """Keep-order: descending score, lower index first on ties."""
        return np.argsort(-self.scores[layer], kind="stable")

    def keep(self, layer: str, width: int) -> np.ndarray:
        """Indices of the ``width`` best filters in their original order."""
        n = len(self.scores[layer])
        if not 1 <= width <= n:
            raise ValueError(f"{layer}: cannot keep {width} of {n}")
        return np.sort(self.order(layer)[:width])


def l1_scores(model: ModelGraph, layer: str) -> np.ndarray:
    w = model[layer].weight.data
    return np.abs(w).reshape(w.shape[0], -1).sum(axis=1).astype(np.float64)


def l2_scores(model: ModelGraph, layer: str) -> np.ndarray:
    w = model[layer].weight.data.astype(np.float64)
    return np.sqrt((w * w).reshape(w.shape[0], -1).sum(axis=1))


def rank_l1(model: ModelGraph) -> FilterRanking:
    return FilterRanking({n: l1_scores(model, n) for n in PRUNABLE}, {n: "l1" for n in PRUNABLE})


def rank_slimming(model: ModelGraph) -> FilterRanking:
    """|gamma| of the batch norm after each conv; fc1 has no BN and falls back to L1."""
    try:
        bn1, bn2 = model["bn1"], model["bn2"]
    except KeyError:
        raise ValueError("slimming needs batch-norm scaling factors after conv1 and conv2") from None
    scores = {"conv1": np.abs(bn1.gamma.data), "conv2": np.abs(bn2.gamma.data),
              "fc1": l1_scores(model, "fc1")}
    return FilterRanking(scores, {"conv1": "bn-gamma", "conv2": "bn-gamma", "fc1": "l1"})


def rank_l2(model: ModelGraph) -> FilterRanking:
    """Filter L2 norms (the soft-filter-pruning criterion); fc1 falls back to L1."""
    scores = {"conv1": l2_scores(model, "conv1"), "conv2": l2_scores(model, "conv2"),
              "fc1": l1_scores(model, "fc1")}
    return FilterRanking(scores, {"conv1": "l2", "conv2": "l2", "fc1": "l1"})


# -- ThiNet ---------------------------------------------------------------

def removal_error(gram: np.ndarray, removed) -> float:
    """Squared reconstruction error ``sum_m ||sum_{c in removed} v_mc||^2``."""
    idx = np.asarray(list(removed), dtype=np.int64)
    return float(gram[np.ix_(idx, idx)].sum()) if idx.size else 0.0


def thinet_greedy(gram: np.ndarray) -> list[int]:
    """Full greedy removal order: each step drops the channel whose removal,
    together with those already dropped, gives the least error."""
    n = gram.shape[0]
    removed: list[int] = []
    row = np.zeros(n)  # sum_{r in removed} gram[c, r]
    base = 0.0
    remaining = list(range(n))
    for _ in range(n):
        cand = np.array(remaining)
        err = base + 2.0 * row[cand] + np.diag(gram)[cand]
        pick = int(cand[np.argmin(err)])  # first minimum -> lower index
        base = float(err.min())
        row += gram[:, pick]
        removed.append(pick)
        remaining.remove(pick)
    return removed


def thinet_exhaustive(gram: np.ndarray, n_remove: int) -> tuple[tuple[int, ...], float]:
    """Best removal set of size ``n_remove`` by enumerating every subset."""
    best, best_err = (), np.inf
    for subset in itertools.combinations(range(gram.shape[0]), n_remove):
        e = removal_error(gram, subset)
        if e < best_err:
            best, best_err = subset, e
    return best, best_err


def contributions_conv(acts: np.ndarray, weight: np.ndarray, positions: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Per-channel contributions to a conv's pre-activation outputs.

    ``acts`` [N, C, H, W] are the layer inputs, ``weight`` [O, C, k, k].
    Returns ``v`` [M, C, O] with ``M = N * positions`` sampled output sites.
    """
    n, c, h, w = acts.shape
    k = weight.shape[-1]
    ho, wo = h - k + 1, w - k + 1
    win = sliding_window_view(acts, (k, k), axis=(2, 3))  # N,C,ho,wo,k,k
    ii = rng.integers(0, ho, size=(n, positions))
    jj = rng.integers(0, wo, size=(n, positions))
    nn = np.repeat(np.arange(n), positions)
    patches = win[nn, :, ii.reshape(-1), jj.reshape(-1)]  # M,C,k,k
    return np.einsum("mckl,ockl->mco", patches.astype(np.float64), weight.astype(np.float64))


def contributions_fc(pooled: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Per-channel contributions of pooled conv maps [N, C, S] to fc inputs grouped
    by channel (flatten order c*S + s). Returns [N, C, O]."""
    n, c, s = pooled.shape
    w = weight.reshape(weight.shape[0], c, s).astype(np.float64)
    return np.einsum("ncs,ocs->nco", pooled.astype(np.float64), w)


def gram_of(v: np.ndarray) -> np.ndarray:
    return np.einsum("mco,mdo->cd", v, v)


def thinet_grams(model: ModelGraph, calib: np.ndarray, positions: int = 16,
                 seed: int = 0, min_patches: int = 256) -> dict:
    """Channel Gram matrices for conv1 (seen through conv2) and conv2 (through fc1)."""
    if len(calib) < min_patches:
        raise ValueError(f"ThiNet needs at least {min_patches} calibration patches, got {len(calib)}")
    was = model.training
    model.eval()
    with no_grad():
        _, taps = model(calib, taps=("relu1", "pool"))
    model.train(was)
    rng = derive(seed, "thinet")
    relu1 = taps["relu1"].data
    pooled = taps["pool"].data
    v1 = contributions_conv(relu1, model["conv2"].weight.data, positions, rng)
    v2 = contributions_fc(pooled.reshape(pooled.shape[0], pooled.shape[1], -1),
                          model["fc1"].weight.data)
    return {"conv1": gram_of(v1), "conv2": gram_of(v2)}


def scores_from_removal(order: list[int]) -> np.ndarray:
    """Earlier-removed channels get lower scores, so keep-order reverses removal."""
    scores = np.empty(len(order))
    scores[np.asarray(order)] = np.arange(len(order), dtype=np.float64)
    return scores


def rank_thinet(model: ModelGraph, calib: np.ndarray, positions: int = 16, seed: int = 0,
                min_patches: int = 256) -> FilterRanking:
    grams = thinet_grams(model, calib, positions, seed, min_patches)
    scores = {name: scores_from_removal(thinet_greedy(g)) for name, g in grams.items()}
    scores["fc1"] = l1_scores(model, "fc1")
    return FilterRanking(scores, {"conv1": "thinet", "conv2": "thinet", "fc1": "l1"})
