"""Pure-numpy versions of the elementwise kernels in ``_kernels.pyx``."""

import numpy as np


def smoothed_abs(x, rho):
    a = np.abs(x)
    return a - np.log1p(rho * a) / rho


def penalty(X, rho):
    """Smoothed-l1 value ``sum(|x| - log(1 + rho|x|)/rho)`` and its gradient.

    The gradient w.r.t. the real inner product is ``rho x / (1 + rho|x|)``,
    which is continuous (and zero) at ``x = 0``.
    """
    a = np.abs(X)
    value = float(np.sum(a - np.log1p(rho * a) / rho))
    return value, (rho / (1.0 + rho * a)) * X


def soft_threshold(z, thresh):
    """Complex soft-thresholding: shrink magnitudes by ``thresh``, keep phases."""
    a = np.abs(z)
    scale = np.maximum(a - thresh, 0.0) / np.where(a > 0, a, 1.0)
    return scale * z
