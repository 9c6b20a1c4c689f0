#!/usr/bin/env python3
"""
Neuro-fuzzy learning for HybridCI
Hybrid learning for Takagi-Sugeno systems (least-squares consequents, then a
gradient step on the antecedent membership parameters) and gradient tuning of
Mamdani membership functions.
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from src.core.datasets import Dataset
from src.core.errors import InvalidConfigError, InvalidInputError, NumericBlowupError
from src.core.numeric import finite_diff_gradient, solve_least_squares
from src.fuzzy.inference import (FuzzySystem, SystemKind, antecedent_memberships, firing_matrix,
                                 normalize_firing_matrix, predict, predict_mamdani, rule_outputs_ts)
from src.fuzzy.membership import Defuzz, MFKind, TNorm

logger = logging.getLogger(__name__)

MAX_HALVINGS = 10


@dataclass(frozen=True)
class NFTrainConfig:
    """
    Neuro-fuzzy training settings.

    Attributes:
        epochs (int): Training epochs
        antecedent_lr (float): Gradient step on membership parameters (0 leaves them unchanged)
        ridge (float): Tikhonov weight for the consequent least-squares pass
        freeze_antecedents (bool): Skip input membership updates
    """

    epochs: int = 10
    antecedent_lr: float = 0.01
    ridge: float = 0.0
    freeze_antecedents: bool = False

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise InvalidConfigError("epochs", f"must be a non-negative integer, got {self.epochs}")
        object.__setattr__(self, "epochs", int(self.epochs))
        if not self.antecedent_lr >= 0:
            raise InvalidConfigError("antecedent_lr", f"must be non-negative, got {self.antecedent_lr}")
        if not self.ridge >= 0:
            raise InvalidConfigError("ridge", f"must be non-negative, got {self.ridge}")


@dataclass(frozen=True)
class NFTrainResult:
    """Trained system; the loss curve starts with the initial error."""

    system: FuzzySystem
    loss_curve: Tuple[float, ...]
    diverged: bool = False

    @property
    def final_loss(self):
        return self.loss_curve[-1] if self.loss_curve else float("nan")


def _check_dataset(fs: FuzzySystem, ds: Dataset):
    if ds.n_inputs != fs.n_inputs or ds.n_targets != 1:
        raise InvalidInputError(
            f"fuzzy systems map {fs.n_inputs} inputs to 1 output; dataset is {ds.n_inputs}->{ds.n_targets}")
    return ds.targets[:, 0]


def system_sse(fs: FuzzySystem, ds: Dataset, defuzz: Defuzz = None):
    """Sum of squared errors of a fuzzy system over a dataset."""
    targets = _check_dataset(fs, ds)
    with np.errstate(over="ignore", invalid="ignore"):
        if fs.kind is SystemKind.MAMDANI:
            predicted = predict_mamdani(fs, ds.inputs, defuzz=defuzz)[0]
        else:
            predicted = predict(fs, ds.inputs)
        residual = predicted - targets
        return float(residual @ residual)


def antecedent_params(fs: FuzzySystem):
    """Input membership parameters, variable by variable and term by term."""
    return np.concatenate([np.asarray(term.params) for v in fs.inputs for term in v.terms])


def _replace_terms(variable, params, offset):
    terms = []
    for term in variable.terms:
        size = len(term.params)
        terms.append(term.with_params(params[offset:offset + size]))
        offset += size
    return replace(variable, terms=tuple(terms)), offset


def with_antecedent_params(fs: FuzzySystem, params):
    """System with new input membership parameters (repaired into valid shapes)."""
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    offset = 0
    inputs = []
    for variable in fs.inputs:
        variable, offset = _replace_terms(variable, params, offset)
        inputs.append(variable)
    if offset != params.size:
        raise InvalidInputError(f"expected {offset} antecedent parameters, got {params.size}")
    return replace(fs, inputs=tuple(inputs))


def consequent_design_matrix(fs: FuzzySystem, inputs):
    """
    Linear system for the Takagi-Sugeno consequents: row i holds the blocks
    w_bar_r(x_i) * (x_i, 1) for every rule r.
    """
    normalized, _ = normalize_firing_matrix(firing_matrix(fs, inputs))
    augmented = np.hstack([inputs, np.ones((inputs.shape[0], 1))])
    return (normalized[:, :, None] * augmented[:, None, :]).reshape(inputs.shape[0], -1)


def lse_consequents(fs: FuzzySystem, ds: Dataset, ridge=0.0):
    """Globally optimal consequents for fixed antecedents; returns (system, LeastSquaresSolution)."""
    targets = _check_dataset(fs, ds)
    solution = solve_least_squares(consequent_design_matrix(fs, ds.inputs), targets, ridge)
    if solution.rank_deficient:
        logger.debug("Consequent system was rank deficient; solved with ridge %.1e", solution.ridge)
    return fs.with_consequents(solution.x), solution


def antecedent_gradient(fs: FuzzySystem, ds: Dataset):
    """
    Analytic gradient of the sum of squared errors with respect to the input
    membership parameters, consequents held fixed.

    Product T-norm uses the product of the other memberships; min T-norm routes
    the derivative to the (first) minimal membership. Samples with zero total
    activation contribute nothing.
    """
    if fs.kind is not SystemKind.TAKAGI_SUGENO:
        raise InvalidInputError("antecedent_gradient needs a Takagi-Sugeno system")
    targets = _check_dataset(fs, ds)
    inputs = ds.inputs
    memberships = antecedent_memberships(fs, inputs)
    rule_weights = np.array([rule.weight for rule in fs.rules])
    firing = fs.tnorm.reduce(memberships, axis=2) * rule_weights
    total = firing.sum(axis=1)
    active = total > 0
    safe_total = np.where(active, total, 1.0)
    outputs = rule_outputs_ts(fs, inputs)
    predicted = np.sum(firing * outputs, axis=1) / safe_total

    error = 2.0 * (predicted - targets)
    d_firing = error[:, None] * (outputs - predicted[:, None]) / safe_total[:, None]
    d_firing[~active] = 0.0

    index = fs.antecedent_index_matrix()
    minimal = np.argmin(memberships, axis=2)
    gradient = []
    for j, variable in enumerate(fs.inputs):
        if fs.tnorm is TNorm.PRODUCT:
            others = np.prod(np.delete(memberships, j, axis=2), axis=2)
            d_membership = rule_weights * others
        else:
            d_membership = np.where(minimal == j, rule_weights, 0.0)
        contribution = d_firing * d_membership
        for term_index, term in enumerate(variable.terms):
            uses = index[:, j] == term_index
            per_sample = contribution[:, uses].sum(axis=1)
            gradient.append(per_sample @ term.param_gradient(inputs[:, j]))
    return np.concatenate(gradient)


def _halving_step(current, loss, params, gradient, rate, rebuild, evaluate):
    """Gradient step with step halving; returns (system, loss), unchanged if no step helps."""
    step = rate
    for _ in range(MAX_HALVINGS + 1):
        try:
            trial = rebuild(params - step * gradient)
            trial_loss = evaluate(trial)
        except InvalidInputError:
            trial_loss = np.inf
        if np.isfinite(trial_loss) and trial_loss <= loss:
            return trial, trial_loss
        step *= 0.5
    return current, loss


def hybrid_train_ts(fs: FuzzySystem, ds: Dataset, cfg: NFTrainConfig):
    """
    Hybrid learning for a Takagi-Sugeno system.

    Each epoch solves the consequents by least squares with the memberships
    fixed, then takes one step-halving gradient step on the membership
    parameters with the consequents fixed. Neither pass may increase the error.

    Returns:
        NFTrainResult: Best system, loss per epoch (initial first), diverged flag
    """
    if fs.kind is not SystemKind.TAKAGI_SUGENO:
        raise InvalidInputError("hybrid_train_ts needs a Takagi-Sugeno system")
    current = fs
    loss = system_sse(current, ds)
    if not np.isfinite(loss):
        logger.warning("Initial neuro-fuzzy error is not finite")
        return NFTrainResult(fs, (), True)
    curve = [loss]
    if loss == 0.0:
        return NFTrainResult(fs, tuple(curve), False)

    for epoch in range(cfg.epochs):
        candidate, _ = lse_consequents(current, ds, cfg.ridge)
        candidate_loss = system_sse(candidate, ds)
        if not np.isfinite(candidate_loss):
            logger.warning("Consequent pass diverged in epoch %d", epoch + 1)
            return NFTrainResult(current, tuple(curve), True)
        if candidate_loss <= loss:
            current, loss = candidate, candidate_loss

        if not cfg.freeze_antecedents and cfg.antecedent_lr > 0 and loss > 0:
            gradient = antecedent_gradient(current, ds)
            if not np.all(np.isfinite(gradient)):
                logger.warning("Antecedent gradient diverged in epoch %d", epoch + 1)
                return NFTrainResult(current, tuple(curve), True)
            base = current
            current, loss = _halving_step(
                current, loss, antecedent_params(current), gradient, cfg.antecedent_lr,
                lambda p: with_antecedent_params(base, p), lambda s: system_sse(s, ds))

        curve.append(loss)
        if loss == 0.0:
            break
    return NFTrainResult(current, tuple(curve), False)


def mamdani_params(fs: FuzzySystem, include_inputs=True):
    """Output membership parameters, preceded by the input ones when include_inputs."""
    output = np.concatenate([np.asarray(term.params) for term in fs.output.terms])
    if not include_inputs:
        return output
    return np.concatenate([antecedent_params(fs), output])


def with_mamdani_params(fs: FuzzySystem, params, include_inputs=True):
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if include_inputs:
        n_input = antecedent_params(fs).size
        fs = with_antecedent_params(fs, params[:n_input])
        params = params[n_input:]
    output, used = _replace_terms(fs.output, params, 0)
    if used != params.size:
        raise InvalidInputError(f"expected {used} output parameters, got {params.size}")
    return replace(fs, output=output)


def gradient_train_mamdani(fs: FuzzySystem, ds: Dataset, cfg: NFTrainConfig):
    """
    Gradient descent on the gaussian membership parameters of a Mamdani system.

    The error is measured with centroid defuzzification and differentiated
    numerically. With freeze_antecedents only the output terms are tuned.

    Raises:
        InvalidInputError: If any term is not gaussian
    """
    if fs.kind is not SystemKind.MAMDANI:
        raise InvalidInputError("gradient_train_mamdani needs a Mamdani system")
    terms = [t for v in fs.inputs for t in v.terms] + list(fs.output.terms)
    if any(t.kind is not MFKind.GAUSSIAN for t in terms):
        raise InvalidInputError("Mamdani gradient training needs gaussian membership functions")

    include_inputs = not cfg.freeze_antecedents

    def evaluate(system):
        return system_sse(system, ds, Defuzz.CENTROID)

    def objective(params):
        try:
            return evaluate(with_mamdani_params(fs, params, include_inputs))
        except InvalidInputError:
            return np.inf

    current = fs
    loss = evaluate(current)
    if not np.isfinite(loss):
        logger.warning("Initial Mamdani error is not finite")
        return NFTrainResult(fs, (), True)
    curve = [loss]

    for epoch in range(cfg.epochs):
        if cfg.antecedent_lr > 0 and loss > 0:
            params = mamdani_params(current, include_inputs)
            try:
                gradient = finite_diff_gradient(objective, params)
            except NumericBlowupError:
                logger.warning("Mamdani error became non-finite in epoch %d", epoch + 1)
                return NFTrainResult(current, tuple(curve), True)
            current, loss = _halving_step(
                current, loss, params, gradient, cfg.antecedent_lr,
                lambda p: with_mamdani_params(fs, p, include_inputs), evaluate)
        curve.append(loss)
    return NFTrainResult(current, tuple(curve), False)
