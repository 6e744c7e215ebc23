"""Linear epsilon-insensitive support vector regression on scalar depth.

Trains the correction model z = w * z0 + b by minimizing the primal

    phi(w, b) = 0.5 * w**2 + c * sum_i max(0, |z_i - (w * z0_i + b)| - eps)

directly in the two unknowns. The solver exploits the problem's structure:

* for fixed ``w`` the optimal bias has a closed form — writing
  r_i = z_i - w * z0_i, the loss in ``b`` is piecewise linear with
  breakpoints at r_i -/+ eps, and any point between the n-th and (n+1)-th
  smallest of those 2n "events" is optimal (the midpoint is used, which
  keeps the solution invariant under sample duplication);
* the reduced objective g(w) = phi(w, b*(w)) is strictly convex, so a
  golden-section search over a bracket guaranteed to contain the minimizer
  (|w*| <= sqrt(2 * g(w0)) for any w0) converges globally and
  deterministically.

An ordinary least-squares baseline and model file I/O live here too.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .pointcloud import PointCloud

__all__ = [
    "SvrHyperparams",
    "TrainingSummary",
    "SvrModel",
    "fit_svr",
    "fit_least_squares",
    "predict",
    "correct_cloud",
    "save_model",
    "load_model",
    "primal_objective",
]

logger = logging.getLogger(__name__)

MODEL_FILE_VERSION = 1

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SvrHyperparams:
    """Primal hyperparameters; defaults are config-exposed, not data-tuned."""

    c: float = 1.0
    epsilon: float = 0.0
    tol: float = 1e-9
    max_iter: int = 100000
    standardize: bool = False

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class TrainingSummary:
    n_samples: int
    objective: float | None
    iterations: int | None
    converged: bool


@dataclass(frozen=True)
class SvrModel:
    w: float
    b: float
    hyperparams: SvrHyperparams
    training_summary: TrainingSummary

    def __post_init__(self):
        if not (math.isfinite(self.w) and math.isfinite(self.b)):
            raise ValueError("model coefficients must be finite")


def primal_objective(w, b, z0, z, c, epsilon):
    """phi(w, b) — exposed so tests can grid-check solver optimality."""
    r = np.abs(z - (w * np.asarray(z0) + b)) - epsilon
    return 0.5 * w * w + c * float(np.maximum(r, 0.0).sum())


def _optimal_b(residuals, epsilon):
    """Exact minimizer of sum_i max(0, |r_i - b| - eps) over b.

    The derivative increases by one unit at each event r_i -/+ eps; it
    crosses zero between the n-th and (n+1)-th smallest event.
    """
    n = residuals.shape[0]
    events = np.concatenate([residuals - epsilon, residuals + epsilon])
    part = np.partition(events, (n - 1, n))
    return 0.5 * (part[n - 1] + part[n])


def _check_design(z0, op):
    if z0.shape[0] < 2 or np.unique(z0).shape[0] < 2:
        raise ValueError(f"{op} needs >= 2 samples with >= 2 distinct z0 values")


def _warn_if_not_corrective(w, op):
    if w < 1.0:
        logger.warning(
            "%s: fitted slope w=%.6g < 1; a refraction-corrective model "
            "trained on valid samples is expected to steepen depths", op, w,
        )


def fit_svr(samples, hp: SvrHyperparams | None = None) -> SvrModel:
    """Fit the epsilon-insensitive model; deterministic for identical inputs.

    With ``hp.standardize`` the feature is shifted/scaled to zero mean and
    unit deviation before solving (the regularizer then applies to the
    standardized slope) and the returned (w, b) are folded back to raw
    units, so ``predict`` needs no extra state.
    """
    hp = hp or SvrHyperparams()
    z0 = np.ascontiguousarray(samples.z0, dtype=np.float64)
    z = np.ascontiguousarray(samples.z, dtype=np.float64)
    _check_design(z0, "fit_svr")

    if hp.standardize:
        mu = float(z0.mean())
        sd = float(z0.std())
        feat = (z0 - mu) / sd
    else:
        mu, sd = 0.0, 1.0
        feat = z0

    c, eps = hp.c, hp.epsilon

    def reduced(w):
        r = z - w * feat
        b = _optimal_b(r, eps)
        loss = np.maximum(np.abs(r - b) - eps, 0.0).sum()
        return 0.5 * w * w + c * float(loss)

    # Bracket: phi >= 0.5 w^2 everywhere, so any evaluated objective bounds w*.
    w_ls, _ = _least_squares_wb(feat, z)
    best_w, best_f = 0.0, reduced(0.0)
    f_ls = reduced(w_ls)
    if f_ls < best_f:
        best_w, best_f = w_ls, f_ls
    bound = math.sqrt(2.0 * min(best_f, f_ls)) + 1.0

    slope_cap = bound + c * float(np.abs(feat).sum())
    width_target = max(hp.tol / slope_cap, 16.0 * np.finfo(np.float64).eps * bound)

    lo, hi = -bound, bound
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = reduced(x1)
    f2 = reduced(x2)
    for cand_w, cand_f in ((x1, f1), (x2, f2)):
        if cand_f < best_f:
            best_w, best_f = cand_w, cand_f
    iterations = 2
    while hi - lo > width_target and iterations < hp.max_iter:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = reduced(x1)
            if f1 < best_f:
                best_w, best_f = x1, f1
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = reduced(x2)
            if f2 < best_f:
                best_w, best_f = x2, f2
        iterations += 1
    converged = hi - lo <= width_target

    b_std = _optimal_b(z - best_w * feat, eps)
    w = best_w / sd
    b = b_std - best_w * mu / sd
    _warn_if_not_corrective(w, "fit_svr")
    summary = TrainingSummary(
        n_samples=z0.shape[0],
        objective=best_f,
        iterations=iterations,
        converged=converged,
    )
    return SvrModel(float(w), float(b), hp, summary)


def _least_squares_wb(z0, z):
    xm = z0.mean()
    ym = z.mean()
    dx = z0 - xm
    denom = float(np.dot(dx, dx))
    w = float(np.dot(dx, z - ym)) / denom
    return w, float(ym - w * xm)


def fit_least_squares(samples, hp: SvrHyperparams | None = None) -> SvrModel:
    """Closed-form ordinary least squares baseline (centered normal equations).

    The training summary's objective is the residual sum of squares.
    """
    hp = hp or SvrHyperparams()
    z0 = np.ascontiguousarray(samples.z0, dtype=np.float64)
    z = np.ascontiguousarray(samples.z, dtype=np.float64)
    _check_design(z0, "fit_least_squares")
    w, b = _least_squares_wb(z0, z)
    _warn_if_not_corrective(w, "fit_least_squares")
    sse = float(np.sum((z - (w * z0 + b)) ** 2))
    summary = TrainingSummary(
        n_samples=z0.shape[0], objective=sse, iterations=0, converged=True
    )
    return SvrModel(w, b, hp, summary)


def predict(model: SvrModel, z0):
    """Apply z = w * z0 + b to a scalar or array of apparent elevations."""
    arr = np.asarray(z0, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("predict requires finite apparent depths")
    out = model.w * arr + model.b
    return float(out) if np.isscalar(z0) or arr.ndim == 0 else out


def correct_cloud(model: SvrModel, cloud: PointCloud) -> PointCloud:
    """Correct underwater elevations, passing land/surface points through.

    Points with z < 0 get z -> predict(z); points with z >= 0 are copied
    bit-identically, as is the whole cloud under the identity model.
    """
    z = cloud.z
    corrected = np.where(z < 0.0, model.w * z + model.b, z)
    return cloud.with_z(corrected)


def save_model(model: SvrModel, path) -> None:
    """Write the key=value model file (shortest round-trip float text)."""
    summary = model.training_summary
    lines = [
        f"version={MODEL_FILE_VERSION}",
        f"w={model.w!r}",
        f"b={model.b!r}",
        f"c={model.hyperparams.c!r}",
        f"epsilon={model.hyperparams.epsilon!r}",
        f"n_samples={summary.n_samples}",
        f"converged={'true' if summary.converged else 'false'}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_MODEL_KEYS = ("version", "w", "b", "c", "epsilon", "n_samples", "converged")


def load_model(path) -> SvrModel:
    """Read a model file; w, b, c and epsilon round-trip exactly."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        values[key.strip()] = value.strip()
    if values.get("version") != str(MODEL_FILE_VERSION):
        raise InputError(
            f"{path}: unsupported model file version {values.get('version')!r}"
        )
    missing = [k for k in _MODEL_KEYS if k not in values]
    if missing:
        raise InputError(f"{path}: truncated model file, missing {missing}")
    try:
        w = float(values["w"])
        b = float(values["b"])
        hp = SvrHyperparams(c=float(values["c"]), epsilon=float(values["epsilon"]))
        n_samples = int(values["n_samples"])
        converged = {"true": True, "false": False}[values["converged"]]
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: malformed model file: {exc}") from exc
    summary = TrainingSummary(
        n_samples=n_samples, objective=None, iterations=None, converged=converged
    )
    return SvrModel(w, b, hp, summary)
