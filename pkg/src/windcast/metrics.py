"""Forecast error indices: MSE, RMSE, MAE and Pearson R."""

import numpy as np


def _pair(pred, obs):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    obs = np.asarray(obs, dtype=np.float64).ravel()
    if pred.shape != obs.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {obs.size} observations")
    if pred.size == 0:
        raise ValueError("cannot score an empty split")
    return pred, obs


def mse(pred, obs) -> float:
    pred, obs = _pair(pred, obs)
    return float(np.mean((pred - obs) ** 2))


def rmse(pred, obs) -> float:
    return float(np.sqrt(mse(pred, obs)))


def mae(pred, obs) -> float:
    pred, obs = _pair(pred, obs)
    return float(np.mean(np.abs(pred - obs)))


def pearson_r(pred, obs) -> float:
    """Pearson correlation; NaN when either side has zero variance."""
    pred, obs = _pair(pred, obs)
    dp = pred - pred.mean()
    do = obs - obs.mean()
    sp = np.sqrt(np.mean(dp * dp))
    so = np.sqrt(np.mean(do * do))
    if sp == 0.0 or so == 0.0:
        return float("nan")
    r = float(np.mean(dp * do) / (sp * so))
    return min(1.0, max(-1.0, r))


def score(pred, obs) -> dict:
    m = mse(pred, obs)
    return {"mse": m, "rmse": float(np.sqrt(m)), "mae": mae(pred, obs), "r": pearson_r(pred, obs)}
