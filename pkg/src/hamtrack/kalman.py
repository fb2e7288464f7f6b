"""Constant-velocity Kalman filtering for track motion and shape.

Each track carries two independent 4-state filters over dt = 1 frame:
motion on the box center [cx, cy, vx, vy] and shape on the box size
[w, h, dw, dh]. Both use the same linear model, so the operations here are
shared; only the initialization differs.

Noise is expressed as standard deviations in pixels. Callers typically scale
them by the current object height so near and far objects behave alike.
"""

from dataclasses import dataclass

import numpy as np

from .core import BBox

F = np.array([[1.0, 0.0, 1.0, 0.0],
              [0.0, 1.0, 0.0, 1.0],
              [0.0, 0.0, 1.0, 0.0],
              [0.0, 0.0, 0.0, 1.0]])
H = np.array([[1.0, 0.0, 0.0, 0.0],
              [0.0, 1.0, 0.0, 0.0]])

_SYM_TOL = 1e-9

# Uninformed velocity prior, as a multiple of object height.
VEL_PRIOR_SCALE = 10.0


@dataclass(frozen=True)
class KalmanState:
    """State estimate: 4-vector mean and symmetric PSD 4x4 covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (4,) or cov.shape != (4, 4):
            raise ValueError(f"expected mean (4,) and cov (4,4), got {mean.shape}, {cov.shape}")
        if np.abs(cov - cov.T).max() > _SYM_TOL:
            raise ValueError("covariance is not symmetric")
        mean = mean.copy()
        cov = cov.copy()
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def _state(mean: np.ndarray, cov: np.ndarray) -> KalmanState:
    return KalmanState(mean, (cov + cov.T) / 2.0)


def _init(observed: tuple[float, float], scale: float,
          pos_std: float | None, vel_std: float | None) -> KalmanState:
    if pos_std is None:
        pos_std = 0.1 * scale
    if vel_std is None:
        vel_std = VEL_PRIOR_SCALE * scale
    mean = np.array([observed[0], observed[1], 0.0, 0.0])
    cov = np.diag([pos_std ** 2, pos_std ** 2, vel_std ** 2, vel_std ** 2])
    return _state(mean, cov)


def init_motion(bbox: BBox, pos_std: float | None = None,
                vel_std: float | None = None) -> KalmanState:
    """New motion filter centered on the box; velocity starts at zero."""
    return _init(bbox.center(), bbox.h, pos_std, vel_std)


def init_shape(bbox: BBox, pos_std: float | None = None,
               vel_std: float | None = None) -> KalmanState:
    """New shape filter on (w, h); size rates start at zero."""
    return _init((bbox.w, bbox.h), bbox.h, pos_std, vel_std)


def process_noise_cov(process_std: float) -> np.ndarray:
    """Process noise: ``process_std`` on the observed pair, half on the rates."""
    s = process_std
    return np.diag([s ** 2, s ** 2, (s / 2.0) ** 2, (s / 2.0) ** 2])


def predict(state: KalmanState, process_std: float = 0.0) -> KalmanState:
    """One-frame constant-velocity prediction: F x, F P F' + Q."""
    mean = F @ state.mean
    cov = F @ state.cov @ F.T + process_noise_cov(process_std)
    return _state(mean, cov)


def update(state: KalmanState, measurement, measurement_std: float = 0.0) -> KalmanState:
    """Correct a predicted state with a 2-vector measurement of the observed pair.

    Uses the Joseph-form covariance update, which stays PSD for any gain and
    keeps the matrix symmetric over long operation sequences.
    """
    z = np.asarray(measurement, dtype=float)
    if z.shape != (2,) or not np.all(np.isfinite(z)):
        raise ValueError(f"measurement must be a finite 2-vector, got {measurement!r}")
    R = np.eye(2) * measurement_std ** 2
    P = state.cov
    S = H @ P @ H.T + R
    PHt = P @ H.T
    try:
        K = np.linalg.solve(S.T, PHt.T).T
    except np.linalg.LinAlgError:
        # Singular innovation covariance: the state is already exactly known
        # in the measured subspace; the pseudo-inverse yields a zero gain there.
        K = PHt @ np.linalg.pinv(S)
    innovation = z - H @ state.mean
    mean = state.mean + K @ innovation
    ikh = np.eye(4) - K @ H
    cov = ikh @ P @ ikh.T + K @ R @ K.T
    return _state(mean, cov)


def position(state: KalmanState) -> np.ndarray:
    return state.mean[:2].copy()


def velocity(state: KalmanState) -> np.ndarray:
    return state.mean[2:].copy()


def clamped_wh(state: KalmanState) -> np.ndarray:
    """Shape-state size floored at 1 px, since affinities divide by it."""
    return np.maximum(state.mean[:2], 1.0)


def predicted_box(motion: KalmanState, shape: KalmanState) -> BBox:
    """Box implied by the two filters' current means."""
    cx, cy = position(motion)
    w, h = clamped_wh(shape)
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def is_finite(state: KalmanState) -> bool:
    return bool(np.all(np.isfinite(state.mean)) and np.all(np.isfinite(state.cov)))
