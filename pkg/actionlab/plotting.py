"""
Static SVG figures. Written with the Agg backend, a fixed hash salt and no
date metadata so reruns produce identical files.
"""

import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dynamics import TrajectoryRecord  # noqa: E402
from .stability import TransitionEnvelope  # noqa: E402

logger = logging.getLogger(__name__)

matplotlib.rcParams["svg.hashsalt"] = "actionlab"


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Figure written to {path}")
    return path


def plot_weights(record: TrajectoryRecord, path: str, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(record.w.shape[1]):
        ax.plot(record.times, record.w[:, i], label=f"w_{i + 1}", linewidth=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("w(t)")
    ax.set_title(title or "weights")
    if record.w.shape[1] <= 8:
        ax.legend(loc="best", fontsize="small")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_energy(record: TrajectoryRecord, path: str, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(record.times, record.U, label="U = V + K")
    ax.plot(record.times, record.Z, label="Z (dissipated)")
    ax.plot(record.times, record.E, label="E (environmental)")
    ax.plot(record.times, record.residual, label="Z + dU - E", linestyle="--")
    ax.set_xlabel("t")
    ax.set_title(title or "energy ledger")
    ax.legend(loc="best", fontsize="small")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_deviation_fit(times: np.ndarray, deviations: np.ndarray, alpha: float, exponent: float,
                       bound_exponent: float, path: str, title: str = "") -> str:
    """Log-log deviation series with the fitted and the bound slopes through the last sample."""
    keep = deviations > 0
    fig, ax = plt.subplots(figsize=(7, 4))
    s = alpha + times[keep]
    ax.loglog(s, deviations[keep], label="||w(t) - w(gamma(t))||", linewidth=1.0)
    if keep.any() and np.isfinite(exponent):
        anchor_s, anchor_d = s[-1], deviations[keep][-1]
        ax.loglog(s, anchor_d * (s / anchor_s) ** exponent, linestyle="--", label=f"fit slope {exponent:.3g}")
        ax.loglog(s, anchor_d * (s / anchor_s) ** bound_exponent, linestyle=":",
                  label=f"bound slope {bound_exponent:.3g}")
    ax.set_xlabel("alpha + t")
    ax.set_title(title or "weight variation over the pseudo-period")
    ax.legend(loc="best", fontsize="small")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_transition(transition: TransitionEnvelope, decay_rate: float, gamma_hat: float, path: str,
                    title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(transition.times, transition.norms, label="||Phi(t, t0)||")
    ax.semilogy(transition.times, gamma_hat * np.exp(-decay_rate * (transition.times - transition.t0)),
                linestyle="--", label=f"gamma e^(-{decay_rate:.3g} t)")
    ax.set_xlabel("t")
    ax.set_title(title or "transition matrix envelope")
    ax.legend(loc="best", fontsize="small")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)
