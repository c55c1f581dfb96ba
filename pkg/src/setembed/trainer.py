"""Training orchestration: softmax pretraining, joint sample+set supervision,
scheduled offline refreshes, per-iteration online blending, plus the 2D toy
experiment, the gradient-check harness, and the update-strategy comparison.

Every source of randomness is derived from the config seed, and reductions run
in fixed order, so a run is a pure function of (config, data): two runs with
the same inputs produce bit-identical logs and checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from .errors import InvalidArgumentError, NumericAbortError, SetEmbedError
from .evaluation import score_pairs, verification_metrics
from .losses import (
    LossResult,
    LossWeights,
    center_loss,
    combine_losses,
    max_margin_loss,
    pushing_loss,
    softmax_loss,
)
from .model import (
    LrSchedule,
    adam_step,
    backward,
    forward,
    init_adam_state,
    init_head,
    init_model,
    lr_at_epoch,
)
from .setparams import (
    CentroidSet,
    SetParams,
    SvmConfig,
    UpdateSchedule,
    compute_centroids,
    offline_update,
    online_update,
)

SET_TERMS = ("max_margin", "center", "pushing")
TOY_SELECTORS = {
    "S": (),
    "S+C": ("center",),
    "S+P": ("pushing",),
    "S+M": ("max_margin",),
}


@dataclass(frozen=True)
class TrainConfig:
    layer_dims: tuple
    class_count: int
    batch_size: int = 64
    epochs: int = 30
    pretrain_epochs: int = 15
    lr: LrSchedule = None
    weights: LossWeights = field(default_factory=LossWeights)
    update: UpdateSchedule = field(default_factory=UpdateSchedule)
    svm: SvmConfig = field(default_factory=SvmConfig)
    seed: int = 0
    enabled_set_terms: tuple = SET_TERMS
    weight_decay: float = 0.0005
    balanced: bool = False
    freeze_backbone: bool = False

    def __post_init__(self):
        if self.lr is None:
            drops = tuple(d for d in (15, 25) if d <= self.epochs)
            object.__setattr__(self, "lr", LrSchedule(drop_epochs=drops,
                                                      final_epoch=self.epochs))
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        object.__setattr__(self, "enabled_set_terms",
                           tuple(self.enabled_set_terms))
        if self.pretrain_epochs > self.epochs or self.pretrain_epochs < 0:
            raise InvalidArgumentError("need 0 <= pretrain_epochs <= epochs")
        if self.batch_size < 2:
            raise InvalidArgumentError("batch_size must be >= 2")
        unknown = set(self.enabled_set_terms) - set(SET_TERMS)
        if unknown:
            raise InvalidArgumentError(f"unknown set terms {sorted(unknown)}")
        if self.active_set_terms() and self.class_count < 2:
            raise InvalidArgumentError("set terms need at least 2 classes")

    def active_set_terms(self) -> tuple:
        """Enabled terms whose weight is > 0; a zero-weight term changes nothing."""
        by_weight = {"max_margin": self.weights.lambda_M,
                     "center": self.weights.lambda_C,
                     "pushing": self.weights.lambda_P}
        return tuple(t for t in SET_TERMS
                     if t in self.enabled_set_terms and by_weight[t] > 0.0)


@dataclass
class IterationRecord:
    iteration: int
    epoch: int
    lr: float
    loss_total: float
    loss_softmax: float
    loss_maxmargin: float
    loss_center: float
    loss_pushing: float
    skipped_classes: int
    offline_fired: bool = False
    online_fired: bool = False


@dataclass
class EvalRecord:
    epoch: int
    accuracy: float
    auc: float
    eer: float
    threshold: float


class MetricsLog:
    """Per-iteration loss records plus per-epoch verification reports."""

    def __init__(self):
        self.iterations = []
        self.evals = []

    def append(self, record: IterationRecord):
        if self.iterations and record.iteration <= self.iterations[-1].iteration:
            raise InvalidArgumentError("iterations must be strictly increasing")
        values = (record.lr, record.loss_total, record.loss_softmax,
                  record.loss_maxmargin, record.loss_center, record.loss_pushing)
        if not all(np.isfinite(v) for v in values):
            raise InvalidArgumentError("metrics log rejects non-finite values")
        self.iterations.append(record)

    def append_eval(self, record: EvalRecord):
        self.evals.append(record)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,epoch,lr,loss_total,loss_softmax,loss_maxmargin,"
                     "loss_center,loss_pushing,skipped_classes\n")
            for r in self.iterations:
                fh.write(f"{r.iteration},{r.epoch},{r.lr!r},{r.loss_total!r},"
                         f"{r.loss_softmax!r},{r.loss_maxmargin!r},{r.loss_center!r},"
                         f"{r.loss_pushing!r},{r.skipped_classes}\n")
            if self.evals:
                fh.write("epoch,accuracy,auc,eer,threshold\n")
                for e in self.evals:
                    fh.write(f"{e.epoch},{e.accuracy!r},{e.auc!r},{e.eer!r},"
                             f"{e.threshold!r}\n")


@dataclass(frozen=True)
class TrainedModel:
    params: object
    head: object
    set_params: object  # None when no set term was ever active


def _checked(term, iteration, fn, *args):
    try:
        return fn(*args)
    except InvalidArgumentError as exc:
        raise NumericAbortError(term, iteration) from exc


def _epoch_batches(dataset, config, epoch):
    """Deterministic batch index lists for one epoch."""
    rng = np.random.default_rng([config.seed, 0x62, epoch])
    n = dataset.sample_count
    batch_count = max(1, n // config.batch_size)
    if not config.balanced:
        perm = rng.permutation(n)
        return [perm[k * config.batch_size:(k + 1) * config.batch_size]
                for k in range(batch_count)]
    per_class = -(-config.batch_size // dataset.class_count)  # ceil
    pools = [dataset.class_indices(j) for j in range(dataset.class_count)]
    batches = []
    for _ in range(batch_count):
        picks = []
        for pool in pools:
            picks.append(rng.choice(pool, size=per_class, replace=pool.size < per_class))
        batch = np.concatenate(picks)
        batches.append(rng.permutation(batch)[:config.batch_size])
    return batches


def train(config: TrainConfig, train_set, eval_pairs=None, on_epoch_end=None,
          on_offline_update=None):
    """Run the full schedule; returns (TrainedModel, MetricsLog).

    Epochs below `pretrain_epochs` use softmax supervision only. At the
    boundary one offline update initializes the set parameters; afterwards
    every iteration adds the active set losses, blends parameters online
    (modes `online_only`/`both`), and re-runs the offline update on the
    configured period (modes `offline_only`/`both`).

    `eval_pairs` is an optional (dataset, PairList) evaluated after every
    epoch; training never sees those samples. `on_epoch_end(epoch, params,
    head)` and `on_offline_update(iteration, params, head, set_params)` are
    observation hooks. Any non-finite loss or gradient aborts with the term
    name and iteration.
    """
    if train_set.class_count != config.class_count:
        raise InvalidArgumentError("config.class_count does not match the dataset")
    if train_set.dim != config.layer_dims[0]:
        raise InvalidArgumentError("config.layer_dims[0] does not match the dataset")

    params = init_model(config.layer_dims, config.seed)
    head = init_head(params.embedding_dim, config.class_count, config.seed)
    model_state = init_adam_state(params.arrays())
    head_state = init_adam_state(head.arrays())

    active_terms = config.active_set_terms()
    set_params = None
    log = MetricsLog()
    weights = config.weights
    it = 0

    for epoch in range(config.epochs):
        lr = lr_at_epoch(config.lr, epoch)
        in_set_phase = bool(active_terms) and epoch >= config.pretrain_epochs
        for batch in _epoch_batches(train_set, config, epoch):
            X = train_set.features[batch]
            y = train_set.labels[batch]
            offline_fired = False
            if in_set_phase:
                boundary = set_params is None
                periodic = (config.update.mode != "online_only"
                            and it % config.update.offline_period_iters == 0)
                if boundary or periodic:
                    set_params = offline_update(params, head, train_set,
                                                config.update, config.svm,
                                                config.seed, it)
                    offline_fired = True
                    if on_offline_update is not None:
                        on_offline_update(it, params, head, set_params)

            embeddings, cache = forward(params, X)
            sm = _checked("softmax", it, softmax_loss, head, embeddings, y)
            sm = sm.scaled(weights.softmax_weight)
            terms = {"softmax": sm}
            if in_set_phase:
                if "max_margin" in active_terms:
                    terms["max_margin"] = _checked(
                        "max_margin", it, max_margin_loss,
                        embeddings, y, set_params.hyperplanes, weights.lambda_M)
                if "center" in active_terms:
                    terms["center"] = _checked(
                        "center", it, center_loss,
                        embeddings, y, set_params.centroids, weights.lambda_C)
                if "pushing" in active_terms:
                    terms["pushing"] = _checked(
                        "pushing", it, pushing_loss,
                        embeddings, y, set_params.centroids, weights.lambda_P)
            total = _checked("combined", it, combine_losses, list(terms.values()))

            param_grads, _ = backward(params, cache, total.grad_embeddings)
            model_grad_arrays = param_grads.arrays()
            if not all(np.all(np.isfinite(g)) for g in model_grad_arrays):
                raise NumericAbortError("backward", it)

            frozen = config.freeze_backbone and epoch >= config.pretrain_epochs
            if not frozen:
                new_arrays, model_state = adam_step(
                    params.arrays(), model_grad_arrays, model_state,
                    lr, config.weight_decay)
                params = params.with_arrays(new_arrays)
            new_head_arrays, head_state = adam_step(
                head.arrays(), list(total.grad_head), head_state,
                lr, config.weight_decay)
            head = head.with_arrays(new_head_arrays)

            online_fired = False
            if in_set_phase and config.update.mode != "offline_only":
                set_params = online_update(set_params, embeddings, y,
                                           config.update, config.svm)
                online_fired = True

            def term_value(name):
                return terms[name].value if name in terms else 0.0

            log.append(IterationRecord(
                iteration=it, epoch=epoch, lr=lr,
                loss_total=total.value,
                loss_softmax=sm.value,
                loss_maxmargin=term_value("max_margin"),
                loss_center=term_value("center"),
                loss_pushing=term_value("pushing"),
                skipped_classes=len(total.skipped_classes),
                offline_fired=offline_fired,
                online_fired=online_fired,
            ))
            it += 1

        if eval_pairs is not None:
            eval_set, pair_list = eval_pairs
            eval_emb, _ = forward(params, eval_set.features)
            scores, flags = score_pairs(eval_emb, pair_list)
            report = verification_metrics(scores, flags)
            log.append_eval(EvalRecord(epoch, report.accuracy, report.auc,
                                       report.eer, report.threshold))
        if on_epoch_end is not None:
            on_epoch_end(epoch, params, head)

    return TrainedModel(params, head, set_params), log


# --- toy 2D experiment -------------------------------------------------------


@dataclass(frozen=True)
class Toy2dResult:
    dataset: object
    snapshots: tuple  # one (n, 2) embedding matrix per epoch
    selector: str

    @property
    def final_embeddings(self):
        return self.snapshots[-1]


def toy2d_config(seed, epochs=12, pretrain_epochs=6):
    return TrainConfig(
        layer_dims=(10, 32, 2),
        class_count=3,
        batch_size=32,
        epochs=epochs,
        pretrain_epochs=pretrain_epochs,
        lr=LrSchedule(base_rate=0.01, drop_epochs=(), final_epoch=epochs),
        update=UpdateSchedule(offline_period_iters=8,
                              per_class_offline_samples=50),
        seed=seed,
    )


def toy2d_experiment(loss_selector, seed, epochs=12, pretrain_epochs=6,
                     per_class=50) -> Toy2dResult:
    """Train a 2D-embedding net on three synthetic identities.

    `loss_selector` is one of S, S+C, S+P, S+M: softmax alone or softmax plus
    one set-based term. Returns one embedding snapshot of the whole toy set
    per epoch.
    """
    if loss_selector not in TOY_SELECTORS:
        raise InvalidArgumentError(
            f"selector must be one of {sorted(TOY_SELECTORS)}, got {loss_selector!r}")
    dataset = data_mod.gen_blobs(class_count=3, per_class=per_class, dim=10,
                                 spread=1.0, separation=6.0, seed=seed)
    config = replace(toy2d_config(seed, epochs, pretrain_epochs),
                     enabled_set_terms=TOY_SELECTORS[loss_selector])

    snapshots = []

    def snap(epoch, params, head):
        emb, _ = forward(params, dataset.features)
        snapshots.append(emb)

    train(config, dataset, on_epoch_end=snap)
    return Toy2dResult(dataset=dataset, snapshots=tuple(snapshots),
                       selector=loss_selector)


# --- gradient checking -------------------------------------------------------


@dataclass(frozen=True)
class GradCheckReport:
    term: str
    max_relative_error: float
    worst_coordinate: tuple
    excluded_coordinates: tuple = ()


def numeric_embedding_gradient(value_fn, X, h=1e-6):
    """Central finite differences of a scalar function of the embedding matrix."""
    X = np.array(X, dtype=np.float64)
    grad = np.zeros_like(X)
    for i in range(X.shape[0]):
        for k in range(X.shape[1]):
            original = X[i, k]
            X[i, k] = original + h
            up = value_fn(X)
            X[i, k] = original - h
            down = value_fn(X)
            X[i, k] = original
            grad[i, k] = (up - down) / (2.0 * h)
    return grad


def grad_check(term_selector, seed, n=16, d=6, m=4, h=1e-6) -> GradCheckReport:
    """Compare a loss term's analytic embedding gradient with finite differences.

    The relative error is the max coordinatewise |analytic - numeric| scaled
    by the larger of the two gradients' max magnitudes. For the pushing term
    one sample is planted exactly on a negative centroid; that sample's
    coordinates are excluded, since the true gradient is undefined there.
    """
    from .svm import FitInfo, Hyperplane, HyperplaneSet

    rng = np.random.default_rng([int(seed), 0x67])
    X = rng.standard_normal((n, d))
    labels = np.concatenate([np.arange(m), rng.integers(0, m, size=n - m)])
    centroid_vecs = rng.standard_normal((m, d)) * 2.0
    centroids = CentroidSet({j: centroid_vecs[j] for j in range(m)},
                            {j: 1 for j in range(m)}, class_count=m)
    planes = {
        j: Hyperplane(w=rng.standard_normal(d), b=float(rng.standard_normal()),
                      class_id=j, fit_info=FitInfo(0, 0.0, True))
        for j in range(m)
    }
    hyperplanes = HyperplaneSet(planes, embedding_dim=d, class_count=m)
    head = init_head(d, m, seed)

    excluded = []
    if term_selector == "softmax":
        def value_fn(Z):
            return softmax_loss(head, Z, labels).value
        analytic = softmax_loss(head, X, labels).grad_embeddings
    elif term_selector == "max_margin":
        def value_fn(Z):
            return max_margin_loss(Z, labels, hyperplanes, 1.0).value
        analytic = max_margin_loss(X, labels, hyperplanes, 1.0).grad_embeddings
    elif term_selector == "center":
        def value_fn(Z):
            return center_loss(Z, labels, centroids, 1.0).value
        analytic = center_loss(X, labels, centroids, 1.0).grad_embeddings
    elif term_selector == "pushing":
        negative = (int(labels[0]) + 1) % m
        X[0] = centroid_vecs[negative]  # undefined-gradient point, excluded below
        excluded = [(0, k) for k in range(d)]
        def value_fn(Z):
            return pushing_loss(Z, labels, centroids, 1.0).value
        analytic = pushing_loss(X, labels, centroids, 1.0).grad_embeddings
    else:
        raise InvalidArgumentError(f"unknown loss term {term_selector!r}")

    numeric = numeric_embedding_gradient(value_fn, X, h=h)
    mask = np.ones_like(X, dtype=bool)
    for i, k in excluded:
        mask[i, k] = False
    scale = max(np.max(np.abs(analytic[mask])), np.max(np.abs(numeric[mask])), 1e-12)
    diff = np.where(mask, np.abs(analytic - numeric), 0.0)
    worst_flat = int(np.argmax(diff))
    worst = (worst_flat // X.shape[1], worst_flat % X.shape[1])
    return GradCheckReport(
        term=term_selector,
        max_relative_error=float(diff.max() / scale),
        worst_coordinate=worst,
        excluded_coordinates=tuple(excluded),
    )


# --- update-strategy comparison ----------------------------------------------


def update_strategy_experiment(seed, modes=("online_only", "offline_only", "both"),
                               loss_selector="S+M", epochs=6, pretrain_epochs=3):
    """Train once per update mode and report verification metrics per mode.

    Uses 20 synthetic training identities and evaluates on pairs drawn from
    10 disjoint held-out identities. Returns a list of rows
    {mode, accuracy, auc, eer}, deterministic given the seed.
    """
    if loss_selector not in TOY_SELECTORS:
        raise InvalidArgumentError(f"unknown loss selector {loss_selector!r}")
    # overlapping clusters keep verification off the ceiling so the update
    # strategies can actually separate in the reported table
    train_set = data_mod.gen_blobs(class_count=20, per_class=30, dim=12,
                                   spread=2.4, separation=5.0, seed=seed)
    eval_set = data_mod.gen_blobs(class_count=10, per_class=12, dim=12,
                                  spread=2.4, separation=5.0, seed=seed + 5000)
    pairs = data_mod.make_verification_pairs(eval_set, count=400, seed=seed + 9000)

    rows = []
    for mode in modes:
        config = TrainConfig(
            layer_dims=(12, 32, 8),
            class_count=20,
            batch_size=64,
            epochs=epochs,
            pretrain_epochs=pretrain_epochs,
            lr=LrSchedule(base_rate=0.005, drop_epochs=(), final_epoch=epochs),
            update=UpdateSchedule(offline_period_iters=8, mode=mode,
                                  per_class_offline_samples=20),
            # hard one-vs-rest subproblems on overlapping data: cap solver
            # effort, approximate hyperplanes are fine for supervision
            svm=SvmConfig(max_iter=15),
            seed=seed,
            enabled_set_terms=TOY_SELECTORS[loss_selector],
        )
        _, log = train(config, train_set, eval_pairs=(eval_set, pairs))
        last = log.evals[-1]
        rows.append({"mode": mode, "accuracy": last.accuracy,
                     "auc": last.auc, "eer": last.eer})
    return rows
