"""Adam over the model's parameter arrays, plus the training driver."""

from __future__ import annotations

import time

import numpy as np

from .loss import compute_loss
from .problems import error_metrics, evaluation_points
from .records import RunRecord
from .tape import Tape


class OptimizerError(RuntimeError):
    pass


class AdamState:
    """First/second moment accumulators with bias-corrected updates."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(np.asarray(v, dtype=float)) for k, v in params.items()}
        self.v = {k: np.zeros_like(np.asarray(v, dtype=float)) for k, v in params.items()}


def adam_step(state, params, grads):
    """One bias-corrected update; mutates and returns ``params``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for parameter '{name}'")
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    for name, g in grads.items():
        m = state.m[name] = b1 * state.m[name] + (1 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        params[name] = params[name] - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def train(model, problem, cfg, iterations, samples, rng=None, *,
          lr=1e-2, metric_every=100, error_target=None, eval_pts=None,
          callbacks=(), adam=None):
    """Run Adam on the configured loss; returns (model, records).

    ``error_target``: reference values on ``eval_pts`` (or on the
    problem's default grid); enables L1/L2/Linf columns.  Records are
    emitted every ``metric_every`` iterations and at the final one.
    Callbacks observe ``(iteration, model, record)`` and must not
    mutate.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    if error_target is not None and eval_pts is None:
        eval_pts = evaluation_points(problem)
    if callable(error_target):
        error_target = np.asarray(error_target(eval_pts), dtype=float)

    params = {k: np.array(v, dtype=float) for k, v in model.parameters().items()}
    if adam is None:
        adam = AdamState(params, lr=lr)
    order = sorted(params)
    records = []
    t0 = time.perf_counter()

    for it in range(1, iterations + 1):
        model.set_parameters(params)
        model.project()
        tape = Tape()
        with np.errstate(over="ignore", under="ignore", invalid="ignore",
                         divide="ignore"):
            parts = compute_loss(model, problem, cfg, samples, tape, rng=rng)
            total, interior, dirichlet, neumann = parts.values()
            if not np.isfinite(total):
                raise OptimizerError(
                    f"non-finite loss {total} at iteration {it}; aborting")
            leaves = [parts.bound[k] for k in order]
            grad_list = tape.gradient(parts.total, leaves)
        grads = dict(zip(order, grad_list))
        params = adam_step(adam, params, grads)

        if it % metric_every == 0 or it == iterations:
            rec = RunRecord(iteration=it, loss_total=total, loss_interior=interior,
                            loss_dirichlet=dirichlet, loss_neumann=neumann,
                            wall_ms=1e3 * (time.perf_counter() - t0))
            if error_target is not None:
                model.set_parameters(params)
                model.project()
                u = model.evaluate(eval_pts)
                rec.L1, rec.L2, rec.Linf = error_metrics(u, error_target)
            records.append(rec)
            for cb in callbacks:
                cb(it, model, rec)

    model.set_parameters(params)
    model.project()
    return model, records
