"""Scalar losses with analytic gradients. Both reduce by batch mean."""

import numpy as np


def softmax_cross_entropy(logits, one_hot):
    """Mean cross-entropy between softmax(logits) and one-hot targets.

    Returns (loss, dlogits). Targets must be exactly one-hot rows.
    """
    logits = np.asarray(logits, dtype=np.float64)
    one_hot = np.asarray(one_hot, dtype=np.float64)
    if logits.shape != one_hot.shape or logits.ndim != 2:
        raise ValueError(f"logits {logits.shape} and targets {one_hot.shape} must be matching 2-D arrays")
    rows_ok = np.all(np.isin(one_hot, (0.0, 1.0))) and np.all(one_hot.sum(axis=1) == 1.0)
    if not rows_ok:
        raise ValueError("targets must be one-hot rows (a single 1, rest 0)")
    batch = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -float((one_hot * log_probs).sum()) / batch
    dlogits = (np.exp(log_probs) - one_hot) / batch
    return loss, dlogits


def huber(pred, target, delta=1.0):
    """Mean Huber loss: quadratic within +-delta of the target, linear outside.

    Returns (loss, dpred).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"pred {pred.shape} and target {target.shape} must match")
    err = pred - target
    abs_err = np.abs(err)
    quad = abs_err <= delta
    losses = np.where(quad, 0.5 * err * err, delta * (abs_err - 0.5 * delta))
    n = max(pred.size, 1)
    dpred = np.where(quad, err, delta * np.sign(err)) / n
    return float(losses.sum()) / n, dpred
