"""Binary cross-entropy training with closed-form gradients and AdaGrad.

Gradients are computed analytically for every parameter block, reusing the
per-mode dot-product tables cached by the forward pass, so no autodiff
framework is involved. The mini-batch loop uses the per-batch *mean*
gradient, a fixed accumulation order, and a seed-driven shuffle, which makes
training bit-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, Instance
from .errors import ConfigError, DataError, MetricError, NumericError
from .metrics import auc, logloss
from .params import ModelBundle, init
from .scoring import ForwardCache, forward_batch, score_dataset, sigmoid

_AXES = "ABCDEFGH"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    l2_linear: float = 0.0
    l2_embedding: float = 0.0
    l2_factors: float = 0.0
    epochs: int = 5
    batch_size: int = 1024
    seed: int = 0
    adagrad_epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("learning rate cannot be negative")
        if min(self.l2_linear, self.l2_embedding, self.l2_factors) < 0:
            raise ConfigError("regularization coefficients cannot be negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be >= 1")


@dataclass
class GradBundle:
    """Gradients with the same shapes as the paired bundle's blocks."""

    w: np.ndarray
    b: float
    embeddings: np.ndarray | None = None
    pair_upper: np.ndarray | None = None
    cp_factors: list[list[np.ndarray]] = field(default_factory=list)
    tucker_cores: list[np.ndarray] = field(default_factory=list)
    tucker_factors: list[list[np.ndarray]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def softplus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def bce_from_score(score, label) -> np.ndarray:
    """Binary cross-entropy evaluated from the raw score (the logit), which
    stays finite for any score magnitude."""
    s = np.asarray(score, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    return softplus(s) - s * y


def bce_loss(probability, label) -> np.ndarray:
    """Binary cross-entropy from a probability in (0, 1)."""
    p = np.asarray(probability, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def _leave_one_out(gs: list[np.ndarray]) -> list[np.ndarray]:
    """For tables G_1..G_l, the elementwise products of all tables but one."""
    count = len(gs)
    prefix = [None] * (count + 1)
    suffix = [None] * (count + 1)
    prefix[0] = np.ones_like(gs[0])
    suffix[count] = np.ones_like(gs[0])
    for i in range(count):
        prefix[i + 1] = prefix[i] * gs[i]
    for i in range(count - 1, -1, -1):
        suffix[i] = suffix[i + 1] * gs[i]
    return [prefix[i] * suffix[i + 1] for i in range(count)]


def backward_from_cache(bundle: ModelBundle, cache: ForwardCache, upstream: np.ndarray) -> GradBundle:
    """Accumulate sum_b upstream[b] * d score_b / d theta for every block.

    ``upstream`` holds one multiplier per batch row (for mean-BCE training,
    (sigmoid(score) - label) / batch_size).
    """
    if cache.gidx is None:
        raise ConfigError("backward pass needs the forward cache")
    upstream = np.asarray(upstream, dtype=np.float64)
    gidx, vals = cache.gidx, cache.vals
    m = bundle.schema.m

    grads = GradBundle(
        w=np.bincount(gidx.ravel(), weights=(upstream[:, None] * vals).ravel(), minlength=m),
        b=float(upstream.sum()),
    )
    kind = bundle.kind
    if kind == "lr":
        return grads

    A = cache.A
    batch, n, k = A.shape
    abar = A.transpose(0, 2, 1)  # (B, k, n) coordinate rows
    d_a = np.zeros_like(A)  # d score / d A per instance, upstream applied later

    if kind == "fm":
        d_a[:] = cache.fm_sum[:, None, :] - A
    elif kind == "fwfm":
        d_a += cache.fwfm_sa.transpose(0, 2, 1)
        weighted = abar * upstream[:, None, None]
        ds_full = 0.5 * (weighted.reshape(-1, n).T @ abar.reshape(-1, n))
        iu = np.triu_indices(n, 1)
        grads.pair_upper = ds_full[iu] + ds_full.T[iu]
    elif kind in ("fwfm-lowrank", "tensorfm"):
        for cs in bundle.cp_sets:
            gs = cache.cp_gs[cs.order]
            loo = _leave_one_out(gs)
            factor_grads = []
            for b_mode, U in enumerate(cs.factors):
                factor_grads.append(np.einsum("z,zhn,zhr->nr", upstream, abar, loo[b_mode]))
                d_a += np.matmul(loo[b_mode], U.T).transpose(0, 2, 1)
            grads.cp_factors.append(factor_grads)
    elif kind == "hofm":
        dp = cache.hofm_dp
        degree = bundle.d
        adj = np.zeros((degree + 1, batch, k))
        adj[2:] = 1.0
        for j in range(n, 0, -1):
            aj = A[:, j - 1, :]
            for t in range(1, degree + 1):
                d_a[:, j - 1, :] += adj[t] * dp[j - 1, t - 1]
            for t in range(1, degree + 1):
                adj[t - 1] += adj[t] * aj
    elif kind == "tensorfm-tucker":
        for ts in bundle.tucker_sets:
            ms = cache.tucker_ms[ts.order]
            axes = _AXES[: ts.order]
            mode_specs = [f"zh{a}" for a in axes]
            grads.tucker_cores.append(
                np.einsum("z," + ",".join(mode_specs) + "->" + axes, upstream, *ms, optimize=True)
            )
            factor_grads = []
            for b_mode, U in enumerate(ts.factors):
                others = [ms[i] for i in range(ts.order) if i != b_mode]
                other_specs = [mode_specs[i] for i in range(ts.order) if i != b_mode]
                dm = np.einsum(
                    axes + "," + ",".join(other_specs) + "->" + f"zh{axes[b_mode]}",
                    ts.core,
                    *others,
                    optimize=True,
                )
                factor_grads.append(np.einsum("z,zhn,zhr->nr", upstream, abar, dm))
                d_a += np.matmul(dm, U.T).transpose(0, 2, 1)
            grads.tucker_factors.append(factor_grads)

    weighted_da = d_a * (upstream[:, None, None] * vals[:, :, None])
    flat_idx = (gidx[..., None] * k + np.arange(k)).ravel()
    grads.embeddings = np.bincount(flat_idx, weights=weighted_da.ravel(), minlength=m * k).reshape(m, k)
    return grads


def backward(bundle: ModelBundle, instance: Instance, upstream: float = 1.0) -> GradBundle:
    """Gradient of the full score of one instance, scaled by ``upstream``."""
    gidx = (instance.active.astype(np.int64) + bundle.schema.offsets)[None, :]
    vals = np.asarray(instance.values, dtype=np.float64)[None, :]
    cache = forward_batch(bundle, gidx, vals)
    return backward_from_cache(bundle, cache, np.asarray([upstream]))


# ---------------------------------------------------------------------------
# AdaGrad
# ---------------------------------------------------------------------------


@dataclass
class AdagradState:
    """Per-coordinate squared-gradient accumulators, one per block."""

    w: np.ndarray
    b: float
    embeddings: np.ndarray | None = None
    pair_upper: np.ndarray | None = None
    cp_factors: list[list[np.ndarray]] = field(default_factory=list)
    tucker_cores: list[np.ndarray] = field(default_factory=list)
    tucker_factors: list[list[np.ndarray]] = field(default_factory=list)

    @classmethod
    def for_bundle(cls, bundle: ModelBundle) -> "AdagradState":
        state = cls(w=np.zeros_like(bundle.linear.w), b=0.0)
        if bundle.embeddings is not None:
            state.embeddings = np.zeros_like(bundle.embeddings.rows)
        if bundle.pair_upper is not None:
            state.pair_upper = np.zeros_like(bundle.pair_upper)
        state.cp_factors = [[np.zeros_like(U) for U in cs.factors] for cs in bundle.cp_sets]
        state.tucker_cores = [np.zeros_like(ts.core) for ts in bundle.tucker_sets]
        state.tucker_factors = [[np.zeros_like(U) for U in ts.factors] for ts in bundle.tucker_sets]
        return state


def _adagrad_block(theta: np.ndarray, grad: np.ndarray, acc: np.ndarray, lr: float, l2: float, eps: float, name: str) -> None:
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient in block {name!r}")
    g = grad + l2 * theta if l2 else grad
    acc += g * g
    theta -= lr * g / (np.sqrt(acc) + eps)


def adagrad_step(bundle: ModelBundle, grads: GradBundle, state: AdagradState, config: TrainConfig) -> None:
    """One in-place AdaGrad update: accumulate squared gradients, then scale
    each coordinate's step by the inverse root of its accumulator. L2 terms
    are added to the gradient before accumulation; the bias is unregularized.
    """
    lr, eps = config.learning_rate, config.adagrad_epsilon
    if not np.isfinite(grads.b):
        raise NumericError("non-finite gradient in block 'linear.b'")
    gb = grads.b
    state.b += gb * gb
    bundle.linear.b -= lr * gb / (np.sqrt(state.b) + eps)
    _adagrad_block(bundle.linear.w, grads.w, state.w, lr, config.l2_linear, eps, "linear.w")
    if bundle.embeddings is not None:
        _adagrad_block(bundle.embeddings.rows, grads.embeddings, state.embeddings, lr, config.l2_embedding, eps, "embeddings")
    if bundle.pair_upper is not None:
        _adagrad_block(bundle.pair_upper, grads.pair_upper, state.pair_upper, lr, config.l2_factors, eps, "pair.upper")
    for cs, gset, aset in zip(bundle.cp_sets, grads.cp_factors, state.cp_factors):
        for b_mode, (U, g, acc) in enumerate(zip(cs.factors, gset, aset)):
            _adagrad_block(U, g, acc, lr, config.l2_factors, eps, f"cp.{cs.order}.factor.{b_mode}")
    for ts, gcore, acore in zip(bundle.tucker_sets, grads.tucker_cores, state.tucker_cores):
        _adagrad_block(ts.core, gcore, acore, lr, config.l2_factors, eps, f"tucker.{ts.order}.core")
    for ts, gset, aset in zip(bundle.tucker_sets, grads.tucker_factors, state.tucker_factors):
        for b_mode, (U, g, acc) in enumerate(zip(ts.factors, gset, aset)):
            _adagrad_block(U, g, acc, lr, config.l2_factors, eps, f"tucker.{ts.order}.factor.{b_mode}")


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    valid_logloss: float
    valid_auc: float
    wall_seconds: float


def train(
    bundle: ModelBundle,
    train_set: Dataset,
    valid_set: Dataset | None,
    config: TrainConfig,
) -> tuple[ModelBundle, list[EpochLog]]:
    """Mini-batch AdaGrad training for a fixed number of epochs.

    The bundle is updated in place and returned together with one log row per
    epoch (mean train BCE, validation log-loss and AUC, wall time). There is
    no early stopping; the final-epoch parameters are the result.
    """
    if len(train_set) == 0:
        raise DataError("cannot train on an empty dataset")
    if train_set.schema.cardinalities != bundle.schema.cardinalities:
        raise ConfigError("training data schema does not match the model schema")
    if valid_set is not None and valid_set.schema.cardinalities != bundle.schema.cardinalities:
        raise ConfigError("validation data schema does not match the model schema")

    state = AdagradState.for_bundle(bundle)
    rng = np.random.default_rng(config.seed)
    gidx_all = train_set.global_indices
    vals_all = train_set.values
    y_all = train_set.labels.astype(np.float64)
    n_rows = len(train_set)

    log: list[EpochLog] = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        perm = rng.permutation(n_rows)
        loss_sum, loss_count = 0.0, 0
        for lo in range(0, n_rows, config.batch_size):
            rows = perm[lo : lo + config.batch_size]
            gidx, vals, y = gidx_all[rows], vals_all[rows], y_all[rows]
            cache = forward_batch(bundle, gidx, vals)
            batch_loss = float(bce_from_score(cache.scores, y).mean())
            if not np.isfinite(batch_loss):
                raise NumericError(
                    f"training loss became non-finite in epoch {epoch}; "
                    f"last completed epoch: {epoch - 1}"
                )
            loss_sum += batch_loss * len(rows)
            loss_count += len(rows)
            upstream = (sigmoid(cache.scores) - y) / len(rows)
            grads = backward_from_cache(bundle, cache, upstream)
            adagrad_step(bundle, grads, state, config)

        valid_ll, valid_auc = float("nan"), float("nan")
        if valid_set is not None and len(valid_set):
            scores = score_dataset(bundle, valid_set)
            valid_ll = logloss(scores, valid_set.labels)
            try:
                valid_auc = auc(scores, valid_set.labels)
            except MetricError:
                pass
        log.append(
            EpochLog(
                epoch=epoch,
                train_loss=loss_sum / loss_count,
                valid_logloss=valid_ll,
                valid_auc=valid_auc,
                wall_seconds=time.perf_counter() - t0,
            )
        )
    return bundle, log


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------


@dataclass
class GridResult:
    learning_rate: float
    l2: float
    valid_auc: float
    valid_logloss: float
    status: str  # "ok" or "failed"


def grid_search(
    kind: str,
    grid: list[tuple[float, float]],
    train_set: Dataset,
    valid_set: Dataset,
    config: TrainConfig,
    k: int = 8,
    d: int = 2,
    r_vec: tuple[int, ...] | int | None = None,
    init_scale: float = 0.01,
) -> tuple[ModelBundle, list[GridResult]]:
    """Train one model per (learning rate, l2) grid point and keep the best.

    Selection is by validation AUC, ties broken by lower validation log-loss
    and then by grid order. Runs that diverge are recorded as failed and
    never selected.
    """
    if not grid:
        raise ConfigError("hyperparameter grid is empty")
    results: list[GridResult] = []
    best: tuple[float, float, int] | None = None
    best_bundle: ModelBundle | None = None
    for order_idx, (lr, l2) in enumerate(grid):
        cfg = replace(config, learning_rate=lr, l2_linear=l2, l2_embedding=l2, l2_factors=l2)
        bundle = init(kind, train_set.schema, k=k, d=d, r_vec=r_vec, init_scale=init_scale, seed=config.seed)
        try:
            bundle, _ = train(bundle, train_set, valid_set, cfg)
            scores = score_dataset(bundle, valid_set)
            valid_auc = auc(scores, valid_set.labels)
            valid_ll = logloss(scores, valid_set.labels)
        except NumericError:
            results.append(GridResult(lr, l2, float("nan"), float("nan"), "failed"))
            continue
        results.append(GridResult(lr, l2, valid_auc, valid_ll, "ok"))
        key = (-valid_auc, valid_ll, order_idx)
        if best is None or key < best:
            best = key
            best_bundle = bundle
    if best_bundle is None:
        raise NumericError("every grid point diverged")
    results.sort(key=lambda r: (-(r.valid_auc if np.isfinite(r.valid_auc) else -np.inf), r.valid_logloss))
    return best_bundle, results
