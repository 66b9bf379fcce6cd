"""Inference-cost accounting and interpretability reports.

FLOPs counts are exact closed forms over the mathematical formulation of each
scorer (one count per scalar multiply or add), so cost comparisons do not
depend on vectorization details. Latency measurement, by contrast, times the
real batch scorers and is only meaningful for ordinal comparisons on one
machine.

The interpretability pipeline compares two per-field-combination rankings:
the occurrence-weighted magnitude of the model's learned interaction terms,
and the mutual information between the fields and the label.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError, MetricError
from .params import ModelBundle
from .scoring import interaction_tensors, score_dataset


# ---------------------------------------------------------------------------
# FLOPs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlopsModel:
    kind: str
    n: int
    k: int
    d: int
    r_vec: tuple[int, ...]
    flops: int


def _linear_flops(n: int) -> int:
    # n multiply-adds plus the bias add
    return 2 * n + 1


def _gather_flops(n: int, k: int) -> int:
    # scaling each gathered embedding by the instance multiplier
    return n * k


def _cp_order_flops(n: int, k: int, order: int, rank: int) -> int:
    # order * k * rank dot products of length n, then an (order-1)-way
    # product and accumulation per (coordinate, component) pair
    return order * k * rank * 2 * n + k * rank * order


def flops_estimate(
    kind: str,
    n: int,
    k: int = 8,
    d: int = 2,
    r_vec: tuple[int, ...] | int | None = None,
) -> FlopsModel:
    """Closed-form scalar operation count for one forward pass.

    Formulas per kind (beyond the shared linear term ``2n + 1`` and, for the
    embedded kinds, the ``nk`` multiplier scaling):

    - ``fm``: field sum ``(n-1)k``, its squared norm ``2k - 1``, the summed
      squared field norms ``2nk - 1``, difference and halving ``2``.
    - ``fwfm``: ``n(n-1)/2`` field pairs, each a length-k dot product plus
      weighting and accumulation, ``2k + 2`` each.
    - ``fwfm-lowrank`` / ``tensorfm``: per order l of rank r, ``l*k*r``
      length-n dot products plus the across-mode product-and-sum, i.e.
      ``2*n*k*r*l + k*r*l``.
    - ``hofm``: the degree-d dynamic program, ``2nkd`` plus the ``(d-1)k``
      final accumulation.
    - ``tensorfm-tucker``: per order, mode products ``2*n*k*r*l`` plus the
      core contraction ``(r**l) * (l*k + 2)``.
    """
    if isinstance(r_vec, int):
        r_vec = (r_vec,) * max(d - 1, 1)
    r_vec = tuple(r_vec or ())
    total = _linear_flops(n)
    if kind == "lr":
        return FlopsModel(kind, n, 0, 1, (), total)

    total += _gather_flops(n, k)
    if kind == "fm":
        total += (n - 1) * k + (2 * k - 1) + (2 * n * k - 1) + 2
    elif kind == "fwfm":
        total += n * (n - 1) // 2 * (2 * k + 2)
    elif kind == "fwfm-lowrank":
        total += _cp_order_flops(n, k, 2, r_vec[0])
    elif kind == "hofm":
        total += 2 * n * k * d + (d - 1) * k
    elif kind == "tensorfm":
        for order, r in zip(range(2, d + 1), r_vec):
            total += _cp_order_flops(n, k, order, r)
    elif kind == "tensorfm-tucker":
        for order, r in zip(range(2, d + 1), r_vec):
            total += 2 * n * k * r * order + (r**order) * (order * k + 2)
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    return FlopsModel(kind, n, k, d, r_vec, total)


# ---------------------------------------------------------------------------
# latency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatencyReport:
    seconds_per_instance: float  # median over repeats
    std_seconds: float
    repeats: int
    n_instances: int


def time_inference(
    bundle: ModelBundle,
    dataset: Dataset,
    repeats: int = 5,
    batch_size: int = 4096,
) -> LatencyReport:
    """Wall-clock scoring latency per instance, median of ``repeats`` passes.

    One untimed warm-up pass runs first. Results are machine-dependent and
    intended only for ordinal comparisons between models.
    """
    if repeats < 3:
        raise ConfigError("need at least 3 repeats for a stable median")
    score_dataset(bundle, dataset, batch_size=batch_size)  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        score_dataset(bundle, dataset, batch_size=batch_size)
        times.append((time.perf_counter() - t0) / len(dataset))
    return LatencyReport(
        seconds_per_instance=float(np.median(times)),
        std_seconds=float(np.std(times)),
        repeats=repeats,
        n_instances=len(dataset),
    )


# ---------------------------------------------------------------------------
# interpretability
# ---------------------------------------------------------------------------


def _tuple_keys(dataset: Dataset, fields: tuple[int, ...]) -> np.ndarray:
    """Integer key per instance identifying its feature tuple at ``fields``."""
    cards = dataset.schema.cardinalities
    keys = np.zeros(len(dataset), dtype=np.int64)
    for f in fields:
        keys = keys * cards[f] + dataset.active[:, f]
    return keys


def _decode_keys(keys: np.ndarray, cards: list[int]) -> np.ndarray:
    out = np.empty((len(keys), len(cards)), dtype=np.int64)
    rem = keys.copy()
    for pos in range(len(cards) - 1, -1, -1):
        out[:, pos] = rem % cards[pos]
        rem //= cards[pos]
    return out


def learned_strength(
    bundle: ModelBundle,
    train_set: Dataset,
    order: int,
    max_entries: int = 10_000_000,
) -> dict[tuple[int, ...], float]:
    """Occurrence-weighted mean interaction magnitude per field combination.

    For each combination of ``order`` distinct fields, every feature tuple
    observed in the training set contributes the magnitude of its interaction
    term — the tensor weight times the multi-way inner product of the
    features' embeddings — weighted by its occurrence count. Tensor weights
    of all orderings of the field combination are averaged, which makes the
    score comparable to the (order-free) mutual information.
    """
    tensors = interaction_tensors(bundle, max_entries=max_entries)
    if order not in tensors:
        raise ConfigError(f"bundle has no order-{order} interaction parameters")
    tensor = tensors[order]
    emb = bundle.embeddings.rows
    offsets = train_set.schema.offsets
    cards = train_set.schema.cardinalities
    n = train_set.schema.n

    out: dict[tuple[int, ...], float] = {}
    for combo in itertools.combinations(range(n), order):
        # mean |tensor entry| over orderings of this field combination
        weight = 0.0
        for perm in itertools.permutations(combo):
            weight += abs(float(tensor[perm]))
        weight /= math.factorial(order)

        keys, counts = np.unique(_tuple_keys(train_set, combo), return_counts=True)
        locals_ = _decode_keys(keys, [cards[f] for f in combo])
        prod = np.ones((len(keys), emb.shape[1]))
        for pos, f in enumerate(combo):
            prod *= emb[offsets[f] + locals_[:, pos]]
        inner = prod.sum(axis=1)
        out[combo] = float((np.abs(inner) * weight * counts).sum() / counts.sum())
    return out


def mutual_information(train_set: Dataset, fields: tuple[int, ...]) -> float:
    """Plug-in mutual information (natural log) between the feature tuple at
    ``fields`` and the label, from empirical frequencies."""
    if len(train_set) == 0:
        raise ConfigError("mutual information needs a non-empty dataset")
    keys = _tuple_keys(train_set, tuple(fields))
    y = train_set.labels.astype(np.int64)
    n = float(len(train_set))

    _, key_ids = np.unique(keys, return_inverse=True)
    joint = np.zeros((key_ids.max() + 1, 2))
    np.add.at(joint, (key_ids, y), 1.0)
    p_joint = joint / n
    p_x = p_joint.sum(axis=1, keepdims=True)
    p_y = p_joint.sum(axis=0, keepdims=True)
    mask = p_joint > 0
    ratio = p_joint[mask] / (p_x @ p_y)[mask]
    return float((p_joint[mask] * np.log(ratio)).sum())


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise MetricError("Pearson correlation needs two aligned vectors of length >= 2")
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        return float("nan")
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


@dataclass(frozen=True)
class OverlapPoint:
    k: int
    overlap: float
    baseline_squared: float  # (k / n_tuples) ** 2
    baseline_uniform: float  # k / n_tuples, the expected overlap of random rankings


@dataclass(frozen=True)
class InteractionReport:
    tuples: list[tuple[int, ...]]
    learned: list[float]
    mutual_info: list[float]
    pearson: float
    topk_overlap: list[OverlapPoint]


def topk_overlap(a, b, k: int) -> float:
    """Fraction of the top-k items (by score) shared between two rankings."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    top_a = set(np.argsort(-a, kind="stable")[:k].tolist())
    top_b = set(np.argsort(-b, kind="stable")[:k].tolist())
    return len(top_a & top_b) / k


def interaction_report(
    bundle: ModelBundle,
    train_set: Dataset,
    order: int,
    k_list: list[int],
    max_entries: int = 10_000_000,
) -> InteractionReport:
    """Learned strength vs. mutual information across all field combinations
    of the given order, with their correlation and top-k ranking overlap."""
    strengths = learned_strength(bundle, train_set, order, max_entries=max_entries)
    tuples = sorted(strengths)
    learned = [strengths[t] for t in tuples]
    mi = [mutual_information(train_set, t) for t in tuples]
    n_tuples = len(tuples)
    points = [
        OverlapPoint(
            k=k,
            overlap=topk_overlap(learned, mi, k),
            baseline_squared=(k / n_tuples) ** 2,
            baseline_uniform=k / n_tuples,
        )
        for k in k_list
        if 1 <= k <= n_tuples
    ]
    return InteractionReport(
        tuples=tuples,
        learned=learned,
        mutual_info=mi,
        pearson=pearson(learned, mi),
        topk_overlap=points,
    )
