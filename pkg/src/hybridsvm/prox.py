"""Closed-form proximal operators shared by the ADMM solvers.

Both operators accept scalars or numpy arrays and apply elementwise.
"""

import numpy as np


def hinge_prox(lam, omega):
    """Proximal operator of the scaled hinge penalty ``lam * max(x, 0)``.

    Returns the minimizer of ``lam * max(x, 0) + 0.5 * (x - omega)**2``:

        omega - lam   if omega > lam
        0             if 0 <= omega <= lam
        omega         if omega < 0

    Ties at ``omega == 0`` and ``omega == lam`` resolve to the middle case.
    """
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    omega = np.asarray(omega, dtype=float)
    out = np.where(omega > lam, omega - lam, np.where(omega < 0.0, omega, 0.0))
    return out if out.ndim else float(out)


def soft_threshold(lam, omega):
    """Soft-thresholding (shrinkage): ``sign(omega) * max(0, |omega| - lam)``.

    Proximal operator of ``lam * |x|``; exactly zeroes magnitudes <= lam.
    """
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    omega = np.asarray(omega, dtype=float)
    out = np.sign(omega) * np.maximum(0.0, np.abs(omega) - lam)
    return out if out.ndim else float(out)
