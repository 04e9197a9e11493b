"""
训练模块：优化器、学习率调度、预训练与微调
"""

from .finetune import Classifier, FineTuneHead, check_labels, finetune, train_classifier
from .optim import AdamW, TrainState, adamw_step
from .pretrain import (
    PretrainResult,
    Pretrainer,
    evaluate_reconstruction,
    mean_predictor_acmse,
    pretrain,
    reconstruct,
    state_path_for,
)
from .schedule import learning_rate, onecycle_lr, warmup_steps

__all__ = [
    "onecycle_lr", "learning_rate", "warmup_steps",
    "AdamW", "TrainState", "adamw_step",
    "Pretrainer", "PretrainResult", "pretrain", "evaluate_reconstruction",
    "mean_predictor_acmse", "reconstruct", "state_path_for",
    "FineTuneHead", "Classifier", "finetune", "train_classifier", "check_labels",
]
