"""Joint sample- and set-based deep metric learning, desk scale.

A small embedding network is trained with softmax cross-entropy plus
set-based terms (max-margin against per-class SVM hyperplanes, centroid
attraction, centroid repulsion). The per-class set parameters are maintained
by periodic offline recomputation and per-iteration online blending.
"""

from .data import LabeledDataset, PairList, gen_blobs, gen_rings, load_dataset_csv, make_verification_pairs
from .evaluation import VerificationReport, cosine_similarity, mean_embedding, verification_metrics
from .losses import LossResult, LossWeights, center_loss, combine_losses, max_margin_loss, pushing_loss, softmax_loss
from .model import (
    AdamState,
    ClassifierHead,
    LrSchedule,
    ModelParams,
    adam_step,
    backward,
    forward,
    init_head,
    init_model,
    load_checkpoint,
    lr_at_epoch,
    save_checkpoint,
)
from .setparams import CentroidSet, SetParams, SvmConfig, UpdateSchedule, compute_centroids, offline_update, online_update
from .svm import Hyperplane, HyperplaneSet, fit_linear_svm, fit_one_vs_all, geometric_margin, min_pairwise_margin, svm_kkt_residual
from .trainer import MetricsLog, TrainConfig, grad_check, toy2d_experiment, train, update_strategy_experiment

__version__ = "0.1.0"
