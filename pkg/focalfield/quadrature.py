"""Gauss-Legendre quadrature with convergence by order doubling."""
import logging
from functools import lru_cache

import numpy as np
from django.conf import settings

from errors import QuadratureError

logger = logging.getLogger(__name__)


@lru_cache(maxsize=32)
def _legendre_rule(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def fixed_order(integrand, lower, upper, order):
    """Integrate ``integrand`` over [lower, upper] along its last axis."""
    nodes, weights = _legendre_rule(order)
    half = (upper - lower) / 2
    x = lower + half * (nodes + 1)
    return half * np.sum(integrand(x) * weights, axis=-1)


def integrate(integrand, lower, upper, rtol=None, min_order=None, max_order=None):
    """Return (value, order) once doubling the order changes the result by <= rtol.

    ``integrand`` must be vectorized over its argument; it may return extra leading
    axes, in which case the convergence test uses the largest change relative to the
    largest magnitude.
    """
    rtol = settings.QUADRATURE_RTOL if rtol is None else rtol
    order = settings.QUADRATURE_MIN_ORDER if min_order is None else min_order
    max_order = settings.QUADRATURE_MAX_ORDER if max_order is None else max_order

    if upper == lower:
        return np.zeros_like(np.asarray(integrand(np.array([lower]))[..., 0])), order

    previous = fixed_order(integrand, lower, upper, order)
    change = np.inf
    while order < max_order:
        order *= 2
        current = fixed_order(integrand, lower, upper, order)
        scale = np.max(np.abs(current))
        change = np.max(np.abs(current - previous))
        if change <= rtol * scale:
            logger.debug('quadrature converged at order %d (change %.3g)', order, change)
            return current, order
        previous = current
    raise QuadratureError(
        f'quadrature did not converge by order {max_order}: '
        f'last change {change:.3g} exceeds relative tolerance {rtol:.1e}',
        order=order,
        change=change,
    )
