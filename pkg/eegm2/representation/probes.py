"""
线性与非线性探针

两种探针都在冻结编码器提取的统计表征上训练，特征按训练集统计量标准化。
线性探针为一对多 L2 正则逻辑回归；非线性探针为两层隐藏层的 MLP。

逻辑回归目标严格凸，两种求解器收敛到同一最优解，只是停止方式不同：
默认 'lbfgs' 用 L-BFGS-B，最多 max_iter 次迭代或梯度最大分量 < tol；
'gd' 为步长 1/L 的全批梯度下降（L 为梯度的 Lipschitz 上界），
最多 max_iter 次迭代或梯度 2-范数 < tol。
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit
from sklearn.preprocessing import StandardScaler

from ..arch.model import EEGM2
from ..config import OptimConfig, ProbeConfig
from ..data.dataset import SignalBatch
from ..diffcore.nn import MLP
from ..diffcore.tensor import GradTape, Tensor
from ..loss.functions import cross_entropy
from ..train.optim import AdamW
from .metrics import ProbeReport
from .stats import flatten_stats
from .tap import encode

logger = logging.getLogger(__name__)


def _check_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError(f"训练集至少需要两个类别，得到 {classes.tolist()}")
    return classes


def _logistic_objective(params: np.ndarray, X: np.ndarray, t: np.ndarray, l2: float):
    """L2 正则（不含偏置）的平均逻辑损失及其梯度，t ∈ {0, 1}"""
    w, b = params[:-1], params[-1]
    margin = X @ w + b
    loss = np.mean(np.logaddexp(0.0, margin) - t * margin) + 0.5 * l2 * (w @ w)
    residual = (expit(margin) - t) / len(t)
    grad = np.concatenate([X.T @ residual + l2 * w, [residual.sum()]])
    return loss, grad


def _gradient_descent(X: np.ndarray, t: np.ndarray, l2: float,
                      max_iter: int, tol: float) -> Tuple[np.ndarray, bool, int]:
    """全批梯度下降，返回 (参数, 是否收敛, 迭代次数)"""
    n, d = X.shape
    augmented = np.hstack([X, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(augmented, 2) ** 2 / n + l2
    params = np.zeros(d + 1)
    for step in range(max_iter):
        _, grad = _logistic_objective(params, X, t, l2)
        if np.linalg.norm(grad) < tol:
            return params, True, step
        params = params - grad / lipschitz
    _, grad = _logistic_objective(params, X, t, l2)
    return params, bool(np.linalg.norm(grad) < tol), max_iter


class LinearProbe:
    """一对多逻辑回归探针"""

    def __init__(self, config: Optional[ProbeConfig] = None):
        self.config = config or ProbeConfig()
        self.scaler = StandardScaler()
        self.classes_: Optional[np.ndarray] = None
        self.coef_: Optional[np.ndarray] = None  # [K', D]，二分类时 K' = 1
        self.intercept_: Optional[np.ndarray] = None
        self.converged_: List[bool] = []
        self.n_iter_: List[int] = []

    def _targets(self, y: np.ndarray) -> List[np.ndarray]:
        assert self.classes_ is not None
        if len(self.classes_) == 2:
            return [(y == self.classes_[1]).astype(np.float64)]
        return [(y == k).astype(np.float64) for k in self.classes_]

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearProbe":
        """
        训练探针

        Args:
            X: 展平的表征 [B, D]
            y: 标签 [B]
        """
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = _check_labels(y)
        Xs = self.scaler.fit_transform(X)
        coefs, intercepts = [], []
        self.converged_, self.n_iter_ = [], []
        cfg = self.config
        for t in self._targets(y):
            if cfg.solver == "gd":
                params, converged, n_iter = _gradient_descent(Xs, t, cfg.l2, cfg.max_iter, cfg.tol)
                message = f"{n_iter} 次迭代后梯度范数仍 >= {cfg.tol:g}"
            else:
                result = minimize(
                    _logistic_objective, np.zeros(Xs.shape[1] + 1), args=(Xs, t, cfg.l2),
                    jac=True, method="L-BFGS-B",
                    options={"maxiter": cfg.max_iter, "gtol": cfg.tol, "ftol": 1e-15},
                )
                params, converged, n_iter = result.x, bool(result.success), int(result.nit)
                message = str(result.message)
            if not converged:
                logger.warning("逻辑回归未收敛: %s", message)
            self.converged_.append(converged)
            self.n_iter_.append(n_iter)
            coefs.append(params[:-1])
            intercepts.append(params[-1])
        self.coef_ = np.array(coefs)
        self.intercept_ = np.array(intercepts)
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        if self.coef_ is None:
            raise RuntimeError("探针尚未训练")
        Xs = self.scaler.transform(np.asarray(X, dtype=np.float64))
        return Xs @ self.coef_.T + self.intercept_

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """二分类返回 [1-p, p]；多分类把各类 sigmoid 分数归一化"""
        scores = expit(self.decision_function(X))
        if scores.shape[1] == 1:
            return np.hstack([1.0 - scores, scores])
        return scores / scores.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        assert self.classes_ is not None
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def gradient_norm(self, X: np.ndarray, y: np.ndarray) -> float:
        """训练目标在当前解处的梯度范数（各一对多子问题取最大）"""
        assert self.coef_ is not None and self.intercept_ is not None
        Xs = self.scaler.transform(np.asarray(X, dtype=np.float64))
        norms = []
        for w, b, t in zip(self.coef_, self.intercept_, self._targets(np.asarray(y))):
            _, grad = _logistic_objective(np.append(w, b), Xs, t, self.config.l2)
            norms.append(float(np.linalg.norm(grad)))
        return max(norms)


class MLPProbe:
    """
    非线性探针：展平表征 → MLP(hidden) → K 类

    Args:
        config: 探针配置（隐藏层宽度、epoch 数、学习率、批大小）
        seed: 初始化与打乱的种子
    """

    def __init__(self, config: Optional[ProbeConfig] = None, seed: int = 0):
        self.config = config or ProbeConfig()
        self.seed = seed
        self.scaler = StandardScaler()
        self.classes_: Optional[np.ndarray] = None
        self.network: Optional[MLP] = None
        self.history: List[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "MLPProbe":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = _check_labels(y)
        targets = np.searchsorted(self.classes_, y)
        Xs = self.scaler.fit_transform(X)
        rng = np.random.default_rng(self.seed)
        self.network = MLP(Xs.shape[1], self.config.mlp_hidden, len(self.classes_),
                           rng=rng, dtype="float64")
        params = list(self.network.named_parameters())
        optimizer = AdamW(params, OptimConfig(init_lr=self.config.mlp_lr, schedule="constant"))
        self.history = []
        for _ in range(self.config.mlp_epochs):
            order = rng.permutation(len(Xs))
            total = 0.0
            for start in range(0, len(order), self.config.batch_size):
                idx = order[start:start + self.config.batch_size]
                with GradTape() as tape:
                    loss = cross_entropy(self.network(Tensor(Xs[idx])), targets[idx])
                optimizer.step(tape.gradient(loss, [p for _, p in params]), self.config.mlp_lr)
                total += loss.item() * len(idx)
            self.history.append(total / len(Xs))
        logger.debug("MLP 探针训练完成，最终损失 %.4f", self.history[-1])
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.network is None:
            raise RuntimeError("探针尚未训练")
        logits = self.network(Tensor(self.scaler.transform(np.asarray(X, dtype=np.float64)))).data
        logits = logits - logits.max(axis=1, keepdims=True)
        proba = np.exp(logits)
        return proba / proba.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        assert self.classes_ is not None
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def linear_probe_fit(Z: np.ndarray, y: np.ndarray, config: Optional[ProbeConfig] = None) -> LinearProbe:
    """在展平表征 [B, 9·C] 上训练线性探针"""
    return LinearProbe(config).fit(Z, y)


def mlp_probe_fit(z: np.ndarray, y: np.ndarray, config: Optional[ProbeConfig] = None,
                  seed: int = 0) -> MLPProbe:
    """在表征 [B, C, 9]（或已展平的 [B, D]）上训练 MLP 探针"""
    z = np.asarray(z)
    return MLPProbe(config, seed).fit(flatten_stats(z) if z.ndim == 3 else z, y)


def probe_evaluate(model: EEGM2,
                   train: SignalBatch,
                   test: SignalBatch,
                   mode: str = "light",
                   config: Optional[ProbeConfig] = None,
                   seeds: Optional[Sequence[int]] = None) -> ProbeReport:
    """
    冻结编码器，提取表征并按多个种子训练探针

    Args:
        model: 预训练（或随机初始化）的模型
        train: 有标签训练窗口
        test: 有标签测试窗口
        mode: 'linear'（逻辑回归）或 'light'（MLP）
        config: 探针配置
        seeds: 种子列表，默认取 config.seeds

    Returns:
        ProbeReport
    """
    if mode not in ("linear", "light"):
        raise ValueError(f"未知的探针模式: {mode}")
    config = config or ProbeConfig()
    seeds = list(seeds if seeds is not None else config.seeds)
    y_train, y_test = train.require_labels(), test.require_labels()
    z_train = flatten_stats(encode(model, train.x, config.layer, config.batch_size))
    z_test = flatten_stats(encode(model, test.x, config.layer, config.batch_size))
    report = ProbeReport(mode=mode, layer=config.layer)
    for seed in seeds:
        probe = linear_probe_fit(z_train, y_train, config) if mode == "linear" \
            else mlp_probe_fit(z_train, y_train, config, seed)
        run = report.add(seed, y_test, probe.predict(z_test), probe.predict_proba(z_test))
        logger.info("%s 探针 seed=%d: balanced_acc=%.4f auroc=%.4f",
                    mode, seed, run["balanced_acc"], run["auroc"])
    return report


def probe_summary_table(reports: Dict[str, ProbeReport]) -> List[Dict[str, object]]:
    """把若干报告整理成表格行"""
    rows = []
    for name, report in reports.items():
        summary = report.summary()
        rows.append({
            "name": name,
            "mode": report.mode,
            "balanced_acc_mean": summary["balanced_acc"]["mean"],
            "balanced_acc_std": summary["balanced_acc"]["std"],
            "auroc_mean": summary["auroc"]["mean"],
            "auroc_std": summary["auroc"]["std"],
        })
    return rows
