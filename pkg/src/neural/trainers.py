#!/usr/bin/env python3
"""
Local-search trainers for HybridCI
Full-batch backpropagation with momentum, scaled conjugate gradient, BFGS
quasi-Newton and Levenberg-Marquardt. All four only ever accept epochs that do
not increase the sum-of-squares error, so loss curves are non-increasing.
"""

import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from src.core.datasets import Dataset
from src.core.errors import InvalidConfigError, TrainingDivergedError
from src.neural import mlp
from src.neural.mlp import MLPNetwork

logger = logging.getLogger(__name__)

BP_MAX_HALVINGS = 10
SCG_SIGMA = 1e-5
SCG_LAMBDA = 1e-6
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
ARMIJO_MAX_STEPS = 50
LM_MAX_LAMBDA = 1e8


class Algorithm(Enum):
    """Local-search weight optimisers."""

    BP = "BP"
    SCG = "SCG"
    QNA = "QNA"
    LM = "LM"


@dataclass(frozen=True)
class TrainerConfig:
    """
    Settings for one training run.

    Attributes:
        algorithm (Algorithm): Which optimiser to use
        epochs (int): Maximum number of epochs (>= 1)
        learning_rate (float): BP step size
        momentum (float): BP momentum in [0, 1)
        lm_lambda0 (float): Initial Levenberg-Marquardt damping
        lm_factor (float): Damping multiplier (> 1)
        tolerance (float): Stop when an epoch improves the error by less than this
    """

    algorithm: Algorithm = Algorithm.BP
    epochs: int = 100
    learning_rate: float = 0.1
    momentum: float = 0.0
    lm_lambda0: float = 1e-3
    lm_factor: float = 10.0
    tolerance: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise InvalidConfigError("epochs", f"must be an integer >= 1, got {self.epochs}")
        object.__setattr__(self, "epochs", int(self.epochs))
        if not self.learning_rate > 0:
            raise InvalidConfigError("learning_rate", f"must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise InvalidConfigError("momentum", f"must be in [0, 1), got {self.momentum}")
        if not self.lm_lambda0 > 0:
            raise InvalidConfigError("lm_lambda0", f"must be positive, got {self.lm_lambda0}")
        if not self.lm_factor > 1:
            raise InvalidConfigError("lm_factor", f"must be greater than 1, got {self.lm_factor}")
        if not self.tolerance >= 0:
            raise InvalidConfigError("tolerance", f"must be non-negative, got {self.tolerance}")

    def to_dict(self):
        data = asdict(self)
        data["algorithm"] = self.algorithm.value
        return data


@dataclass(frozen=True)
class TrainReport:
    """Outcome of train(): the loss curve starts with the initial error."""

    final_net: MLPNetwork
    loss_curve: Tuple[float, ...]
    epochs_run: int
    converged: bool

    @property
    def final_loss(self):
        return self.loss_curve[-1]


class _Objective:
    """Sum-of-squares error of a fixed network shape as a function of its flat parameters."""

    def __init__(self, net: MLPNetwork, ds: Dataset):
        self.template = net
        self.ds = ds

    def network(self, w):
        return self.template.with_params(w)

    def loss(self, w):
        if not np.all(np.isfinite(w)):
            return np.inf
        with np.errstate(over="ignore", invalid="ignore"):
            return mlp.sse(self.network(w), self.ds)

    def gradient(self, w):
        with np.errstate(over="ignore", invalid="ignore"):
            return mlp.gradient(self.network(w), self.ds)

    def residuals_and_jacobian(self, w):
        net = self.network(w)
        with np.errstate(over="ignore", invalid="ignore"):
            return mlp.residuals(net, self.ds), mlp.jacobian(net, self.ds)


class _Run:
    """Bookkeeping shared by the optimisers: accepted weights, curve and divergence checks."""

    def __init__(self, objective: _Objective, w, algorithm):
        self.objective = objective
        self.algorithm = algorithm
        self.w = w
        self.curve = [objective.loss(w)]
        self.epochs_run = 0
        self.converged = False
        if not np.isfinite(self.curve[0]):
            self.diverged("initial error is not finite")

    @property
    def loss(self):
        return self.curve[-1]

    def diverged(self, reason):
        logger.warning("%s training diverged after %d epochs: %s", self.algorithm.value, self.epochs_run, reason)
        finite = [v for v in self.curve if np.isfinite(v)]
        raise TrainingDivergedError(f"{self.algorithm.value} training diverged: {reason}",
                                    network=self.objective.network(self.w), loss_curve=finite)

    def check_vector(self, vector, what):
        if not np.all(np.isfinite(vector)):
            self.diverged(f"non-finite {what}")
        return vector

    def accept(self, w, loss, tolerance):
        """Record an accepted epoch; returns True when training should stop."""
        improvement = self.loss - loss
        self.w = w
        self.curve.append(loss)
        if loss == 0.0 or improvement < tolerance:
            self.converged = True
            return True
        return False

    def report(self):
        return TrainReport(self.objective.network(self.w), tuple(float(v) for v in self.curve),
                           self.epochs_run, self.converged)


def _train_bp(run: _Run, cfg: TrainerConfig):
    velocity = np.zeros_like(run.w)
    for _ in range(cfg.epochs):
        run.epochs_run += 1
        g = run.check_vector(run.objective.gradient(run.w), "gradient")
        step = cfg.momentum * velocity - cfg.learning_rate * g
        scale = 1.0
        for _ in range(BP_MAX_HALVINGS + 1):
            trial = run.w + scale * step
            trial_loss = run.objective.loss(trial)
            if np.isfinite(trial_loss) and trial_loss <= run.loss:
                break
            scale *= 0.5
        else:
            logger.debug("BP stalled: no acceptable step after %d halvings", BP_MAX_HALVINGS)
            return
        velocity = scale * step
        if run.accept(trial, trial_loss, cfg.tolerance):
            return


def _train_scg(run: _Run, cfg: TrainerConfig):
    w = run.w
    n_params = w.size
    g = run.check_vector(run.objective.gradient(w), "gradient")
    direction = -g
    beta = SCG_LAMBDA
    success = True
    successes = 0
    mu = kappa = gamma = 0.0
    for _ in range(cfg.epochs):
        run.epochs_run += 1
        if success:
            mu = direction @ g
            if mu >= 0:
                direction = -g
                mu = direction @ g
            kappa = direction @ direction
            if kappa < np.finfo(np.float64).eps ** 2:
                run.converged = True
                return
            sigma = SCG_SIGMA / np.sqrt(kappa)
            g_plus = run.check_vector(run.objective.gradient(w + sigma * direction), "gradient")
            gamma = direction @ (g_plus - g) / sigma

        delta = gamma + beta * kappa
        if delta <= 0:
            delta = beta * kappa
            beta = beta - gamma / kappa
        alpha = -mu / delta
        trial = w + alpha * direction
        trial_loss = run.objective.loss(trial)
        if np.isfinite(trial_loss):
            comparison = 2.0 * (trial_loss - run.loss) / (alpha * mu)
        else:
            comparison = -np.inf

        success = comparison >= 0
        if success:
            successes += 1
            w = trial
            if run.accept(trial, trial_loss, cfg.tolerance):
                return
            g_old = g
            g = run.check_vector(run.objective.gradient(w), "gradient")

        if comparison < 0.25:
            beta = min(4.0 * beta, 1e100)
        if comparison > 0.75:
            beta = max(0.5 * beta, 1e-15)

        if successes == n_params:
            direction = -g
            successes = 0
        elif success:
            restart_coefficient = (g_old - g) @ g / mu
            direction = restart_coefficient * direction - g


def _train_qna(run: _Run, cfg: TrainerConfig):
    n_params = run.w.size
    identity = np.eye(n_params)
    inverse_hessian = identity.copy()
    g = run.check_vector(run.objective.gradient(run.w), "gradient")
    for _ in range(cfg.epochs):
        run.epochs_run += 1
        direction = -inverse_hessian @ g
        slope = direction @ g
        if slope >= 0:
            inverse_hessian = identity.copy()
            direction = -g
            slope = direction @ g
        if slope == 0:
            run.converged = True
            return

        t = 1.0
        for _ in range(ARMIJO_MAX_STEPS):
            trial = run.w + t * direction
            trial_loss = run.objective.loss(trial)
            if np.isfinite(trial_loss) and trial_loss <= run.loss + ARMIJO_C * t * slope:
                break
            t *= ARMIJO_SHRINK
        else:
            logger.debug("QNA line search failed to find an Armijo step")
            return

        s = trial - run.w
        g_new = run.check_vector(run.objective.gradient(trial), "gradient")
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            left = identity - rho * np.outer(s, y)
            inverse_hessian = left @ inverse_hessian @ left.T + rho * np.outer(s, s)
        g = g_new
        if run.accept(trial, trial_loss, cfg.tolerance):
            return


def _train_lm(run: _Run, cfg: TrainerConfig):
    damping = cfg.lm_lambda0
    n_params = run.w.size
    for _ in range(cfg.epochs):
        run.epochs_run += 1
        r, J = run.objective.residuals_and_jacobian(run.w)
        run.check_vector(J, "Jacobian")
        normal = J.T @ J
        g = J.T @ r
        while True:
            try:
                step = np.linalg.solve(normal + damping * np.eye(n_params), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                damping *= cfg.lm_factor
                if damping > LM_MAX_LAMBDA:
                    run.diverged("normal matrix stayed singular up to damping 1e8")
                continue

            trial = run.w + step
            trial_loss = run.objective.loss(trial)
            if np.isfinite(trial_loss) and trial_loss <= run.loss:
                damping /= cfg.lm_factor
                break
            damping *= cfg.lm_factor
            if damping > LM_MAX_LAMBDA:
                logger.debug("LM stalled: damping exceeded %.0e", LM_MAX_LAMBDA)
                return
        if run.accept(trial, trial_loss, cfg.tolerance):
            return


_TRAINERS = {
    Algorithm.BP: _train_bp,
    Algorithm.SCG: _train_scg,
    Algorithm.QNA: _train_qna,
    Algorithm.LM: _train_lm,
}


def train(net: MLPNetwork, ds: Dataset, cfg: TrainerConfig):
    """
    Train a network on a dataset with the configured local-search algorithm.

    Args:
        net (MLPNetwork): Starting network (not modified)
        ds (Dataset): Training data
        cfg (TrainerConfig): Algorithm and its settings

    Returns:
        TrainReport: Final network and the loss after every accepted epoch

    Raises:
        TrainingDivergedError: If the error or its derivatives become non-finite
    """
    objective = _Objective(net, ds)
    run = _Run(objective, net.flatten(), cfg.algorithm)
    if run.loss == 0.0:
        run.converged = True
        return run.report()
    _TRAINERS[cfg.algorithm](run, cfg)
    report = run.report()
    logger.debug("%s finished after %d epochs: sse %.6g -> %.6g", cfg.algorithm.value,
                 report.epochs_run, report.loss_curve[0], report.final_loss)
    return report
