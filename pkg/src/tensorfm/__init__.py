"""Factorization machines with low-rank higher-order field interactions.

The package trains and scores a family of models over sparse multi-field
categorical data — logistic regression, factorization machines, field-
weighted variants, and their generalization whose per-order field-interaction
tensors are constrained to low rank — together with synthetic interaction
datasets, evaluation metrics, inference-cost accounting, and an
interpretability pipeline.

Set ``TENSORFM_THREADS`` to cap the BLAS thread pools before this package
first imports numpy.
"""

import os as _os

if "TENSORFM_THREADS" in _os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["TENSORFM_THREADS"])

from .analysis import (
    FlopsModel,
    InteractionReport,
    LatencyReport,
    flops_estimate,
    interaction_report,
    learned_strength,
    mutual_information,
    time_inference,
)
from .data import (
    Dataset,
    FieldSchema,
    Instance,
    SyntheticSpec,
    build_schema,
    generate_synthetic,
    load_tabular,
    read_dataset,
    split,
    write_dataset,
)
from .errors import (
    ConfigError,
    DataError,
    MetricError,
    ModelIOError,
    NumericError,
    SchemaError,
    TensorFMError,
)
from .metrics import EvalReport, auc, evaluate, logloss
from .params import (
    CPFactorSet,
    EmbeddingTable,
    LinearWeights,
    ModelBundle,
    TuckerFactorSet,
    fwfm_lowrank_from_dense,
    init,
    load_bundle,
    materialize_tensor,
    materialize_tucker,
    param_count,
    save_bundle,
    symmetrize,
)
from .scoring import (
    embed_view,
    predict_proba,
    score,
    score_dataset,
    score_fm,
    score_fwfm_dense,
    score_fwfm_lowrank,
    score_hofm,
    score_linear,
    score_naive_oracle,
    score_tensorfm_cp,
    score_tensorfm_tucker,
    sigmoid,
)
from .training import (
    AdagradState,
    EpochLog,
    GradBundle,
    GridResult,
    TrainConfig,
    adagrad_step,
    backward,
    backward_from_cache,
    bce_from_score,
    bce_loss,
    grid_search,
    train,
)

__version__ = "0.1.0"
