"""Forward evaluation of every model kind.

Two routes exist for each model: a fast factorized scorer whose cost is
linear in the number of fields for the low-rank kinds, and a brute-force
reference (:func:`score_naive_oracle`) that materializes the interaction
tensors and sums over every ordered field index tuple. The fast scorers are
the production path; the oracle exists so tests can check them against an
independent computation.

Batch scorers operate on ``(B, n)`` index/value arrays and return ``(B,)``
scores. Per-instance functions wrap a batch of one.

All scorers are pure functions of a frozen bundle and the instance data;
they are safe to call concurrently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Instance
from .errors import ConfigError
from .params import (
    CPFactorSet,
    ModelBundle,
    TuckerFactorSet,
    materialize_tensor,
    materialize_tucker,
)

_AXES = "ABCDEFGH"


# ---------------------------------------------------------------------------
# gathering
# ---------------------------------------------------------------------------


def gather_embeddings(bundle: ModelBundle, gidx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """(B, n, k) array whose row [b, j] is the embedding of the active feature
    of field j, scaled by the instance multiplier."""
    return bundle.embeddings.rows[gidx] * vals[..., None]


def embed_view(bundle: ModelBundle, instance: Instance) -> np.ndarray:
    """The per-instance (k, n) embedding matrix: column j is the scaled
    embedding of the feature active in field j."""
    gidx = instance.active.astype(np.int64) + bundle.schema.offsets
    return (bundle.embeddings.rows[gidx] * instance.values[:, None]).T


def _as_batch(bundle: ModelBundle, instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    gidx = instance.active.astype(np.int64) + bundle.schema.offsets
    return gidx[None, :], np.asarray(instance.values, dtype=np.float64)[None, :]


# ---------------------------------------------------------------------------
# batch interaction terms
# ---------------------------------------------------------------------------


def linear_batch(bundle: ModelBundle, gidx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return bundle.linear.b + (bundle.linear.w[gidx] * vals).sum(axis=1)


def fm_pair_batch(A: np.ndarray) -> np.ndarray:
    """Unweighted distinct-pair dot-product sum: half of (norm of the field
    sum squared minus the sum of squared field norms)."""
    s = A.sum(axis=1)
    return 0.5 * ((s * s).sum(axis=1) - (A * A).sum(axis=(1, 2)))


def fwfm_pair_batch(A: np.ndarray, pair_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Field-weighted pair sum (half the bilinear form of ``pair_matrix``)
    plus the intermediate product reused by the backward pass."""
    b, n, k = A.shape
    abar = A.transpose(0, 2, 1)  # (B, k, n)
    sa = (abar.reshape(-1, n) @ pair_matrix).reshape(b, k, n)
    return 0.5 * (abar * sa).sum(axis=(1, 2)), sa


def cp_mode_products(A: np.ndarray, cp_set: CPFactorSet) -> list[np.ndarray]:
    """Per-mode dot-product tables G_b[., i, j] = <factor column j of mode b,
    coordinate row i of the instance embedding matrix>; each (B, k, rank)."""
    abar = A.transpose(0, 2, 1)
    return [abar @ U for U in cp_set.factors]


def cp_order_batch(gs: list[np.ndarray]) -> np.ndarray:
    prod = gs[0].copy()
    for g in gs[1:]:
        prod *= g
    return prod.sum(axis=(1, 2))


def tucker_mode_products(A: np.ndarray, ts: TuckerFactorSet) -> list[np.ndarray]:
    abar = A.transpose(0, 2, 1)
    return [abar @ U for U in ts.factors]


def tucker_order_batch(ms: list[np.ndarray], ts: TuckerFactorSet) -> np.ndarray:
    axes = _AXES[: ts.order]
    subscripts = axes + "," + ",".join(f"bh{a}" for a in axes) + "->b"
    return np.einsum(subscripts, ts.core, *ms, optimize=True)


def hofm_table_batch(A: np.ndarray, degree: int) -> np.ndarray:
    """Dynamic-program table for sums of distinct-field products.

    Returns ``dp`` of shape (n + 1, degree + 1, B, k) where ``dp[j, t]``
    accumulates, per embedding coordinate, the sum over all strictly
    increasing t-subsets of the first j fields of the product of their
    entries. The degree-t interaction term is ``dp[n, t]`` summed over
    coordinates.
    """
    b, n, k = A.shape
    dp = np.zeros((n + 1, degree + 1, b, k))
    dp[:, 0] = 1.0
    for j in range(1, n + 1):
        aj = A[:, j - 1, :]
        for t in range(1, degree + 1):
            dp[j, t] = dp[j - 1, t] + aj * dp[j - 1, t - 1]
    return dp


def hofm_batch(A: np.ndarray, degree: int) -> np.ndarray:
    dp = hofm_table_batch(A, degree)
    return dp[-1, 2:].sum(axis=(0, 2))


# ---------------------------------------------------------------------------
# full forward pass with gradient cache
# ---------------------------------------------------------------------------


@dataclass
class ForwardCache:
    """Everything the backward pass needs from a batch forward pass."""

    gidx: np.ndarray
    vals: np.ndarray
    scores: np.ndarray
    A: np.ndarray | None = None
    fm_sum: np.ndarray | None = None  # (B, k) sum of field embeddings
    fwfm_sa: np.ndarray | None = None  # (B, k, n) pair_matrix applied to coordinate rows
    cp_gs: dict[int, list[np.ndarray]] = field(default_factory=dict)
    tucker_ms: dict[int, list[np.ndarray]] = field(default_factory=dict)
    hofm_dp: np.ndarray | None = None


def forward_batch(bundle: ModelBundle, gidx: np.ndarray, vals: np.ndarray) -> ForwardCache:
    """Score a batch under the bundle's kind, keeping backward intermediates.

    The returned scores are the full predictor (linear term plus the kind's
    interaction terms).
    """
    scores = linear_batch(bundle, gidx, vals)
    cache = ForwardCache(gidx=gidx, vals=vals, scores=scores)
    kind = bundle.kind
    if kind == "lr":
        return cache

    A = gather_embeddings(bundle, gidx, vals)
    cache.A = A
    if kind == "fm":
        cache.fm_sum = A.sum(axis=1)
        scores += 0.5 * ((cache.fm_sum**2).sum(axis=1) - (A * A).sum(axis=(1, 2)))
    elif kind == "fwfm":
        term, sa = fwfm_pair_batch(A, bundle.dense_s)
        cache.fwfm_sa = sa
        scores += term
    elif kind == "fwfm-lowrank":
        gs = cp_mode_products(A, bundle.cp_sets[0])
        cache.cp_gs[2] = gs
        scores += cp_order_batch(gs)
    elif kind == "hofm":
        cache.hofm_dp = hofm_table_batch(A, bundle.d)
        scores += cache.hofm_dp[-1, 2:].sum(axis=(0, 2))
    elif kind == "tensorfm":
        for cs in bundle.cp_sets:
            gs = cp_mode_products(A, cs)
            cache.cp_gs[cs.order] = gs
            scores += cp_order_batch(gs)
    elif kind == "tensorfm-tucker":
        for ts in bundle.tucker_sets:
            ms = tucker_mode_products(A, ts)
            cache.tucker_ms[ts.order] = ms
            scores += tucker_order_batch(ms, ts)
    cache.scores = scores
    return cache


def score_batch(bundle: ModelBundle, gidx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return forward_batch(bundle, gidx, vals).scores


def score_dataset(bundle: ModelBundle, dataset: Dataset, batch_size: int = 4096) -> np.ndarray:
    if dataset.schema.cardinalities != bundle.schema.cardinalities:
        raise ConfigError("dataset schema does not match the model schema")
    out = np.empty(len(dataset))
    for lo in range(0, len(dataset), batch_size):
        hi = min(lo + batch_size, len(dataset))
        out[lo:hi] = score_batch(bundle, dataset.global_indices[lo:hi], dataset.values[lo:hi])
    return out


# ---------------------------------------------------------------------------
# per-instance scorers
# ---------------------------------------------------------------------------


def score_linear(bundle: ModelBundle, instance: Instance) -> float:
    gidx, vals = _as_batch(bundle, instance)
    return float(linear_batch(bundle, gidx, vals)[0])


def score_fm(bundle: ModelBundle, instance: Instance) -> float:
    """Distinct-field pair term only (no linear block)."""
    gidx, vals = _as_batch(bundle, instance)
    return float(fm_pair_batch(gather_embeddings(bundle, gidx, vals))[0])


def score_fwfm_dense(bundle: ModelBundle, instance: Instance) -> float:
    """Field-weighted pair term only (no linear block)."""
    gidx, vals = _as_batch(bundle, instance)
    term, _ = fwfm_pair_batch(gather_embeddings(bundle, gidx, vals), bundle.dense_s)
    return float(term[0])


def score_fwfm_lowrank(bundle: ModelBundle, instance: Instance) -> float:
    """Factored pair term only: Frobenius inner product of the embedding
    matrix applied to the two factor matrices."""
    gidx, vals = _as_batch(bundle, instance)
    gs = cp_mode_products(gather_embeddings(bundle, gidx, vals), bundle.cp_sets[0])
    return float(cp_order_batch(gs)[0])


def score_hofm(bundle: ModelBundle, instance: Instance, degree: int | None = None) -> float:
    """Sum of all distinct-field interaction terms of orders 2..degree."""
    degree = bundle.d if degree is None else degree
    if not 2 <= degree <= bundle.schema.n:
        raise ConfigError(f"degree {degree} must lie in [2, n={bundle.schema.n}]")
    gidx, vals = _as_batch(bundle, instance)
    return float(hofm_batch(gather_embeddings(bundle, gidx, vals), degree)[0])


def score_tensorfm_cp(bundle: ModelBundle, instance: Instance) -> float:
    """Full predictor: linear block plus every low-rank interaction order."""
    gidx, vals = _as_batch(bundle, instance)
    return float(forward_batch(bundle, gidx, vals).scores[0])


def score_tensorfm_tucker(bundle: ModelBundle, instance: Instance) -> float:
    """Full predictor for the core/factor parameterization."""
    gidx, vals = _as_batch(bundle, instance)
    return float(forward_batch(bundle, gidx, vals).scores[0])


def score(bundle: ModelBundle, instance: Instance) -> float:
    """Full predictor for any kind: linear block plus interaction terms."""
    gidx, vals = _as_batch(bundle, instance)
    return float(forward_batch(bundle, gidx, vals).scores[0])


def predict_proba(bundle: ModelBundle, instance: Instance) -> float:
    return float(sigmoid(np.asarray(score(bundle, instance))))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (never exponentiates a large
    positive argument)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def interaction_tensors(bundle: ModelBundle, max_entries: int = 10_000_000) -> dict[int, np.ndarray]:
    """Dense per-order field interaction tensors implied by the bundle.

    For the pair-based kinds the order-2 tensor already folds in the half
    factor of their symmetric formulation, so the literal ordered-tuple sum
    over the returned tensor reproduces the model's interaction term.
    """
    n = bundle.schema.n
    kind = bundle.kind
    if kind == "fm":
        return {2: (np.ones((n, n)) - np.eye(n)) / 2.0}
    if kind == "fwfm":
        return {2: bundle.dense_s / 2.0}
    if kind == "fwfm-lowrank":
        return {2: materialize_tensor(bundle.cp_sets[0], max_entries)}
    if kind == "tensorfm":
        return {cs.order: materialize_tensor(cs, max_entries) for cs in bundle.cp_sets}
    if kind == "tensorfm-tucker":
        return {ts.order: materialize_tucker(ts, max_entries) for ts in bundle.tucker_sets}
    return {}


def oracle_interaction_sum(a_matrix: np.ndarray, tensors: dict[int, np.ndarray]) -> float:
    """Literal sum over every ordered field index tuple.

    ``a_matrix`` is the per-instance (k, n) embedding matrix; each tensor
    entry weights the multi-way inner product of the addressed columns. This
    is the exponential-time reference the fast scorers are tested against.
    """
    n = a_matrix.shape[1]
    total = 0.0
    for order, tensor in sorted(tensors.items()):
        for tup in itertools.product(range(n), repeat=order):
            weight = float(tensor[tup])
            if weight == 0.0:
                continue
            total += weight * float(np.prod(a_matrix[:, list(tup)], axis=1).sum())
    return total


def score_naive_oracle(bundle: ModelBundle, instance: Instance, max_tuples: int = 1_000_000) -> float:
    """Reference score: linear block plus interaction terms computed by
    materializing every interaction tensor and summing over all index tuples.
    """
    n = bundle.schema.n
    total_tuples = sum(n**o for o in range(2, bundle.d + 1)) if bundle.kind != "lr" else 0
    if total_tuples > max_tuples:
        raise ConfigError(f"oracle would sum {total_tuples} tuples, above the cap of {max_tuples}")

    total = score_linear(bundle, instance)
    if bundle.kind == "lr":
        return total
    a_matrix = embed_view(bundle, instance)
    if bundle.kind == "hofm":
        for order in range(2, bundle.d + 1):
            for combo in itertools.combinations(range(n), order):
                total += float(np.prod(a_matrix[:, list(combo)], axis=1).sum())
        return total
    return total + oracle_interaction_sum(a_matrix, interaction_tensors(bundle, max_entries=max_tuples))
