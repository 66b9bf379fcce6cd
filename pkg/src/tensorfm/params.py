"""Learnable parameter blocks, initialization, and model serialization.

A :class:`ModelBundle` carries exactly the blocks its kind needs:

====================  =======================================================
kind                  blocks beyond linear (w, b)
====================  =======================================================
``lr``                none
``fm``                embeddings
``fwfm``              embeddings + symmetric zero-diagonal field-pair matrix
``fwfm-lowrank``      embeddings + one order-2 factor pair (U, V)
``hofm``              embeddings (interactions up to degree ``d``)
``tensorfm``          embeddings + one factor set per order 2..d
``tensorfm-tucker``   embeddings + one core/factor set per order 2..d
====================  =======================================================

The field-pair matrix of ``fwfm`` is stored as its strict upper triangle and
mirrored on read, so symmetry and the zero diagonal hold structurally.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import FieldSchema, build_schema
from .errors import ConfigError, ModelIOError

KINDS = ("lr", "fm", "fwfm", "fwfm-lowrank", "hofm", "tensorfm", "tensorfm-tucker")
EMBEDDED_KINDS = ("fm", "fwfm", "fwfm-lowrank", "hofm", "tensorfm", "tensorfm-tucker")
HIGHER_ORDER_KINDS = ("hofm", "tensorfm", "tensorfm-tucker")

FORMAT_VERSION = "v1"


@dataclass
class LinearWeights:
    w: np.ndarray  # (m,)
    b: float


@dataclass
class EmbeddingTable:
    rows: np.ndarray  # (m, k)

    @property
    def k(self) -> int:
        return self.rows.shape[1]


@dataclass
class CPFactorSet:
    """Rank-``rank`` sum-of-outer-products parameterization of an order-``order``
    field interaction tensor: entry (i_1..i_l) = sum_j prod_b factors[b][i_b, j]."""

    order: int
    rank: int
    factors: list[np.ndarray]  # order matrices, each (n, rank)

    def __post_init__(self):
        if len(self.factors) != self.order:
            raise ConfigError(f"order-{self.order} factor set needs {self.order} matrices")
        n = self.factors[0].shape[0]
        for b, U in enumerate(self.factors):
            if U.shape != (n, self.rank):
                raise ConfigError(
                    f"factor {b} of order-{self.order} set has shape {U.shape}, expected {(n, self.rank)}"
                )


@dataclass
class TuckerFactorSet:
    """Core-tensor-plus-factor-matrices parameterization with per-mode ranks."""

    order: int
    ranks: tuple[int, ...]
    core: np.ndarray  # shape == ranks
    factors: list[np.ndarray]  # order matrices, the b-th of shape (n, ranks[b])

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        if len(self.ranks) != self.order or len(self.factors) != self.order:
            raise ConfigError(f"order-{self.order} set needs {self.order} ranks and factors")
        if self.core.shape != self.ranks:
            raise ConfigError(f"core shape {self.core.shape} does not match ranks {self.ranks}")
        n = self.factors[0].shape[0]
        for b, U in enumerate(self.factors):
            if U.shape != (n, self.ranks[b]):
                raise ConfigError(
                    f"factor {b} of order-{self.order} set has shape {U.shape}, "
                    f"expected {(n, self.ranks[b])}"
                )


@dataclass
class ModelBundle:
    kind: str
    schema: FieldSchema
    linear: LinearWeights
    embeddings: EmbeddingTable | None = None
    pair_upper: np.ndarray | None = None  # (n*(n-1)/2,) strict upper triangle, row-major
    cp_sets: list[CPFactorSet] = field(default_factory=list)
    tucker_sets: list[TuckerFactorSet] = field(default_factory=list)
    d: int = 1
    r_vec: tuple[int, ...] = ()

    def __post_init__(self):
        self.r_vec = tuple(int(r) for r in self.r_vec)
        validate_bundle(self)

    @property
    def k(self) -> int:
        return self.embeddings.k if self.embeddings is not None else 0

    @property
    def dense_s(self) -> np.ndarray:
        """Full symmetric zero-diagonal field-pair matrix (fwfm only)."""
        n = self.schema.n
        s = np.zeros((n, n))
        s[np.triu_indices(n, 1)] = self.pair_upper
        return s + s.T

    def cp_set_for_order(self, order: int) -> CPFactorSet:
        for cs in self.cp_sets:
            if cs.order == order:
                return cs
        raise ConfigError(f"bundle has no order-{order} factor set")


def validate_bundle(bundle: ModelBundle) -> None:
    kind, schema = bundle.kind, bundle.schema
    n = schema.n
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {KINDS}")
    if bundle.linear.w.shape != (schema.m,):
        raise ConfigError(f"linear weights must have length m={schema.m}")
    if (kind in EMBEDDED_KINDS) != (bundle.embeddings is not None):
        raise ConfigError(f"kind {kind!r} and embedding block presence disagree")
    if bundle.embeddings is not None and bundle.embeddings.rows.shape[0] != schema.m:
        raise ConfigError("embedding table must have one row per feature")
    if (kind == "fwfm") != (bundle.pair_upper is not None):
        raise ConfigError(f"kind {kind!r} and field-pair block presence disagree")
    if bundle.pair_upper is not None and bundle.pair_upper.shape != (n * (n - 1) // 2,):
        raise ConfigError("field-pair block must hold the strict upper triangle")

    if kind in HIGHER_ORDER_KINDS:
        if not 2 <= bundle.d <= n:
            raise ConfigError(f"interaction order d={bundle.d} must lie in [2, n={n}]")
    if kind in ("tensorfm", "tensorfm-tucker"):
        if len(bundle.r_vec) != bundle.d - 1:
            raise ConfigError(f"need one rank per order 2..{bundle.d}, got {bundle.r_vec}")
        if any(not 1 <= r <= n for r in bundle.r_vec):
            raise ConfigError(f"ranks must lie in [1, n={n}], got {bundle.r_vec}")
    want_cp = {"tensorfm": bundle.d - 1, "fwfm-lowrank": 1}.get(kind, 0)
    if len(bundle.cp_sets) != want_cp:
        raise ConfigError(f"kind {kind!r} expects {want_cp} factor sets, got {len(bundle.cp_sets)}")
    want_tucker = bundle.d - 1 if kind == "tensorfm-tucker" else 0
    if len(bundle.tucker_sets) != want_tucker:
        raise ConfigError(f"kind {kind!r} expects {want_tucker} core sets, got {len(bundle.tucker_sets)}")
    if kind == "fwfm-lowrank" and not 1 <= bundle.cp_sets[0].rank <= n:
        raise ConfigError(f"pair rank must lie in [1, n={n}]")


def init(
    kind: str,
    schema: FieldSchema,
    k: int = 8,
    d: int = 2,
    r_vec: tuple[int, ...] | int | None = None,
    init_scale: float = 0.01,
    seed: int = 0,
) -> ModelBundle:
    """Build a freshly initialized bundle.

    Embeddings and all interaction parameters are i.i.d. Normal(0,
    ``init_scale``^2); linear weights and bias start at zero. A scalar
    ``r_vec`` is replicated across orders 2..d.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {KINDS}")
    n = schema.n
    rng = np.random.default_rng(seed)
    linear = LinearWeights(w=np.zeros(schema.m), b=0.0)

    if kind == "lr":
        return ModelBundle(kind, schema, linear)

    if k < 1:
        raise ConfigError("embedding size k must be >= 1")
    emb = EmbeddingTable(rng.normal(0.0, init_scale, size=(schema.m, k)))

    if kind == "fm":
        return ModelBundle(kind, schema, linear, embeddings=emb)

    if kind == "fwfm":
        pair = rng.normal(0.0, init_scale, size=n * (n - 1) // 2)
        return ModelBundle(kind, schema, linear, embeddings=emb, pair_upper=pair)

    if kind == "hofm":
        return ModelBundle(kind, schema, linear, embeddings=emb, d=d)

    if isinstance(r_vec, int):
        r_vec = (r_vec,) * (1 if kind == "fwfm-lowrank" else d - 1)
    if r_vec is None:
        raise ConfigError(f"kind {kind!r} needs interaction ranks")

    if kind == "fwfm-lowrank":
        r = int(r_vec[0])
        if not 1 <= r <= n:
            raise ConfigError(f"pair rank {r} must lie in [1, n={n}]")
        factors = [rng.normal(0.0, init_scale, size=(n, r)) for _ in range(2)]
        return ModelBundle(
            kind, schema, linear, embeddings=emb, cp_sets=[CPFactorSet(2, r, factors)], d=2, r_vec=(r,)
        )

    if kind == "tensorfm":
        sets = []
        for order, r in zip(range(2, d + 1), r_vec):
            if not 1 <= r <= n:
                raise ConfigError(f"rank {r} for order {order} must lie in [1, n={n}]")
            sets.append(CPFactorSet(order, r, [rng.normal(0.0, init_scale, size=(n, r)) for _ in range(order)]))
        return ModelBundle(kind, schema, linear, embeddings=emb, cp_sets=sets, d=d, r_vec=tuple(r_vec))

    # tensorfm-tucker: same rank for every mode within an order
    sets = []
    for order, r in zip(range(2, d + 1), r_vec):
        if not 1 <= r <= n:
            raise ConfigError(f"rank {r} for order {order} must lie in [1, n={n}]")
        ranks = (int(r),) * order
        core = rng.normal(0.0, init_scale, size=ranks)
        factors = [rng.normal(0.0, init_scale, size=(n, r)) for _ in range(order)]
        sets.append(TuckerFactorSet(order, ranks, core, factors))
    return ModelBundle(kind, schema, linear, embeddings=emb, tucker_sets=sets, d=d, r_vec=tuple(r_vec))


def param_count(bundle: ModelBundle) -> int:
    """Exact number of learnable scalars in the bundle."""
    total = bundle.linear.w.size + 1
    if bundle.embeddings is not None:
        total += bundle.embeddings.rows.size
    if bundle.pair_upper is not None:
        total += bundle.pair_upper.size
    for cs in bundle.cp_sets:
        total += sum(U.size for U in cs.factors)
    for ts in bundle.tucker_sets:
        total += ts.core.size + sum(U.size for U in ts.factors)
    return int(total)


# ---------------------------------------------------------------------------
# dense materialization (for oracles and interpretability)
# ---------------------------------------------------------------------------

_AXES = "abcdefgh"


def materialize_tensor(cp_set: CPFactorSet, max_entries: int = 10_000_000) -> np.ndarray:
    """Expand a factor set into the dense order-``order`` tensor it encodes."""
    n = cp_set.factors[0].shape[0]
    if n**cp_set.order > max_entries:
        raise ConfigError(f"dense tensor would hold {n ** cp_set.order} entries, above {max_entries}")
    axes = _AXES[: cp_set.order]
    subscripts = ",".join(f"{a}z" for a in axes) + "->" + axes
    return np.einsum(subscripts, *cp_set.factors)


def materialize_tucker(tucker_set: TuckerFactorSet, max_entries: int = 10_000_000) -> np.ndarray:
    """Expand a core/factor set into the dense tensor it encodes."""
    n = tucker_set.factors[0].shape[0]
    if n**tucker_set.order > max_entries:
        raise ConfigError(f"dense tensor would hold {n ** tucker_set.order} entries, above {max_entries}")
    axes = _AXES[: tucker_set.order]
    core_axes = axes.upper()
    subscripts = core_axes + "," + ",".join(f"{a}{A}" for a, A in zip(axes, core_axes)) + "->" + axes
    return np.einsum(subscripts, tucker_set.core, *tucker_set.factors)


def symmetrize(tensor: np.ndarray) -> np.ndarray:
    """Average a tensor over all permutations of its axes."""
    order = tensor.ndim
    acc = np.zeros_like(tensor)
    for perm in itertools.permutations(range(order)):
        acc += np.transpose(tensor, perm)
    return acc / math.factorial(order)


def fwfm_lowrank_from_dense(bundle: ModelBundle, rank: int | None = None) -> ModelBundle:
    """Convert a dense field-pair model into its factored equivalent.

    The pair term of the dense model is half the bilinear form of its matrix
    S, so S/2 is what gets factored; with full rank the two models score
    identically on every instance.
    """
    if bundle.kind != "fwfm":
        raise ConfigError("can only factor a dense field-pair bundle")
    n = bundle.schema.n
    r = n if rank is None else int(rank)
    uu, sv, vt = np.linalg.svd(bundle.dense_s / 2.0)
    left = uu[:, :r] * sv[:r]
    right = vt[:r].T
    return ModelBundle(
        "fwfm-lowrank",
        bundle.schema,
        LinearWeights(bundle.linear.w.copy(), bundle.linear.b),
        embeddings=EmbeddingTable(bundle.embeddings.rows.copy()),
        cp_sets=[CPFactorSet(2, r, [left, right])],
        d=2,
        r_vec=(r,),
    )


# ---------------------------------------------------------------------------
# model file format: plain text, one header line per scalar key, then shape-
# tagged blocks of row-major floats at full round-trip precision.
# ---------------------------------------------------------------------------


def _write_block(fh, name: str, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    shape = "x".join(str(s) for s in arr.shape) if arr.ndim else "1"
    fh.write(f"block {name} {shape}\n")
    flat = arr.reshape(-1, arr.shape[-1]) if arr.ndim >= 2 else arr.reshape(1, -1)
    for row in flat:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"tensorfm-model {FORMAT_VERSION}\n")
        fh.write(f"kind {bundle.kind}\n")
        fh.write("cardinalities " + ",".join(str(c) for c in bundle.schema.cardinalities) + "\n")
        fh.write(f"k {bundle.k}\n")
        fh.write(f"d {bundle.d}\n")
        fh.write("r_vec " + (",".join(str(r) for r in bundle.r_vec) or "-") + "\n")
        _write_block(fh, "linear.b", np.asarray(bundle.linear.b))
        _write_block(fh, "linear.w", bundle.linear.w)
        if bundle.embeddings is not None:
            _write_block(fh, "embeddings", bundle.embeddings.rows)
        if bundle.pair_upper is not None:
            _write_block(fh, "pair.upper", bundle.pair_upper)
        for cs in bundle.cp_sets:
            for b, U in enumerate(cs.factors):
                _write_block(fh, f"cp.{cs.order}.factor.{b}", U)
        for ts in bundle.tucker_sets:
            _write_block(fh, f"tucker.{ts.order}.core", ts.core)
            for b, U in enumerate(ts.factors):
                _write_block(fh, f"tucker.{ts.order}.factor.{b}", U)
        fh.write("end\n")


def _read_blocks(lines: list[str], start: int) -> dict[str, np.ndarray]:
    blocks: dict[str, np.ndarray] = {}
    i = start
    while i < len(lines):
        line = lines[i].rstrip("\n")
        if line == "end":
            return blocks
        if not line.startswith("block "):
            raise ModelIOError(f"expected a block header, got {line!r}")
        try:
            _, name, shape_s = line.split()
            shape = tuple(int(s) for s in shape_s.split("x"))
        except ValueError as exc:
            raise ModelIOError(f"malformed block header {line!r}") from exc
        n_rows = 1 if len(shape) < 2 else int(np.prod(shape[:-1]))
        rows = []
        for r in range(n_rows):
            i += 1
            if i >= len(lines):
                raise ModelIOError(f"file truncated inside block {name!r}")
            rows.append([float(tok) for tok in lines[i].split()])
        try:
            arr = np.asarray(rows, dtype=np.float64).reshape(shape)
        except ValueError as exc:
            raise ModelIOError(f"block {name!r} does not match its declared shape {shape}") from exc
        blocks[name] = arr
        i += 1
    raise ModelIOError("file truncated: missing 'end' marker")


def load_bundle(path: str | Path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise ModelIOError(f"model file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("tensorfm-model "):
        raise ModelIOError(f"{path}: not a model file")
    version = lines[0].split(maxsplit=1)[1]
    if version != FORMAT_VERSION:
        raise ModelIOError(f"{path}: format version {version!r}, this build reads {FORMAT_VERSION!r}")

    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("block "):
        key, _, value = lines[i].partition(" ")
        header[key] = value
        i += 1
    try:
        kind = header["kind"]
        schema = build_schema([int(c) for c in header["cardinalities"].split(",")])
        d = int(header["d"])
        r_vec = tuple(int(r) for r in header["r_vec"].split(",")) if header["r_vec"] != "-" else ()
    except (KeyError, ValueError) as exc:
        raise ModelIOError(f"{path}: bad or missing header field: {exc}") from exc

    blocks = _read_blocks(lines, i)

    def take(name: str, shape: tuple[int, ...]) -> np.ndarray:
        if name not in blocks:
            raise ModelIOError(f"{path}: missing block {name!r}")
        arr = blocks.pop(name)
        if arr.shape != shape:
            raise ModelIOError(f"{path}: block {name!r} has shape {arr.shape}, expected {shape}")
        return arr

    linear = LinearWeights(w=take("linear.w", (schema.m,)), b=float(take("linear.b", (1,))[0]))
    emb = None
    if kind in EMBEDDED_KINDS:
        k = int(header.get("k", 0))
        emb = EmbeddingTable(take("embeddings", (schema.m, k)))
    pair = None
    if kind == "fwfm":
        pair = take("pair.upper", (schema.n * (schema.n - 1) // 2,))
    cp_sets = []
    if kind == "fwfm-lowrank":
        r = r_vec[0]
        cp_sets = [CPFactorSet(2, r, [take(f"cp.2.factor.{b}", (schema.n, r)) for b in range(2)])]
    elif kind == "tensorfm":
        for order, r in zip(range(2, d + 1), r_vec):
            cp_sets.append(
                CPFactorSet(order, r, [take(f"cp.{order}.factor.{b}", (schema.n, r)) for b in range(order)])
            )
    tucker_sets = []
    if kind == "tensorfm-tucker":
        for order, r in zip(range(2, d + 1), r_vec):
            ranks = (r,) * order
            core = take(f"tucker.{order}.core", ranks)
            factors = [take(f"tucker.{order}.factor.{b}", (schema.n, r)) for b in range(order)]
            tucker_sets.append(TuckerFactorSet(order, ranks, core, factors))
    if blocks:
        raise ModelIOError(f"{path}: unexpected blocks {sorted(blocks)} for kind {kind!r}")
    return ModelBundle(
        kind, schema, linear, embeddings=emb, pair_upper=pair, cp_sets=cp_sets,
        tucker_sets=tucker_sets, d=d, r_vec=r_vec,
    )
