"""
分类指标与多种子汇总
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.metrics import balanced_accuracy_score, roc_auc_score


def balanced_accuracy(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    """各类召回率的无权平均"""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"y_true 与 y_pred 长度不一致: {y_true.shape} vs {y_pred.shape}")
    if len(y_true) == 0:
        raise ValueError("没有样本，无法计算平衡准确率")
    return float(balanced_accuracy_score(y_true, y_pred))


def auroc(y_true: Sequence[int], scores: Sequence[float]) -> float:
    """
    二分类 ROC 曲线下面积

    即随机正样本得分高于随机负样本的概率，同分计 1/2。
    """
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape:
        raise ValueError(f"y_true 与 scores 长度不一致: {y_true.shape} vs {scores.shape}")
    classes = np.unique(y_true)
    if len(classes) != 2:
        raise ValueError(f"AUROC 需要恰好两个类别，得到 {classes.tolist()}")
    return float(roc_auc_score(y_true == classes[1], scores))


def multiclass_auroc(y_true: Sequence[int], proba: np.ndarray) -> float:
    """二分类取正类概率；多分类取一对多 AUROC 的宏平均"""
    y_true = np.asarray(y_true)
    proba = np.asarray(proba, dtype=np.float64)
    if proba.ndim == 1 or proba.shape[1] == 2:
        return auroc(y_true, proba if proba.ndim == 1 else proba[:, 1])
    present = np.unique(y_true)
    if len(present) < 2:
        raise ValueError("AUROC 需要至少两个类别")
    return float(np.mean([auroc(y_true == k, proba[:, k]) for k in present]))


@dataclass
class ProbeReport:
    """多种子评估报告"""
    mode: str
    runs: List[Dict[str, float]] = field(default_factory=list)
    layer: Optional[str] = None

    def add(self, seed: int, y_true: np.ndarray, y_pred: np.ndarray, proba: np.ndarray) -> Dict[str, float]:
        run = {
            "seed": seed,
            "balanced_acc": balanced_accuracy(y_true, y_pred),
            "auroc": multiclass_auroc(y_true, proba),
        }
        self.runs.append(run)
        return run

    def summary(self) -> Dict[str, Dict[str, float]]:
        """各指标的均值与总体标准差"""
        result = {}
        for key in ("balanced_acc", "auroc"):
            values = np.array([r[key] for r in self.runs], dtype=np.float64)
            result[key] = {
                "mean": float(values.mean()) if len(values) else float("nan"),
                "std": float(values.std()) if len(values) else float("nan"),
            }
        return result

    def to_dict(self) -> Dict[str, object]:
        return {"mode": self.mode, "layer": self.layer, "runs": self.runs, "summary": self.summary()}
