"""Order-by-order asymptotic solution of the unit-scale equation near a
hypersurface, and extraction of the obstruction density.

Given a defining density σ for Σ (weight 1, vanishing on Σ, with S(σ) > 0
there), the expansion produces densities σ_m with S(σ_m) = 1 + O(σ^m):

  normalize   σ̂ = σ / sqrt(S(σ))                       gives order 1,
  improve(k)  σ' = σ (1 + λ_k (S(σ) − 1)),
              λ_k = −d / (2 (k+1) (d−k)),               gives order k+1.

The improvement coefficient comes from the first variation
    S(σ + σ^{k+1} α) − S(σ) = (2 (k+1) (d−k)/d) σ^k α |dσ|² + O(σ^{k+1}),
whose prefactor vanishes exactly at k = d: that is the obstruction to a
smooth solution.  The order-d residual, restricted to Σ,

    B = lim (S(σ_d) − 1) / σ^d   on Σ,

is the obstruction density; in dimension 3 it is the Willmore invariant
with leading term −(1/3) Δ_Σ H.

Residuals are measured along straight coordinate rays through foot points
on Σ in the direction of the metric-unit conormal.  The order-of-vanishing
fit is a least-squares slope of log|S−1| against log|σ| over a geometric
ladder of ray distances; ladder points whose residual sits below the
floating-point noise floor are discarded, and an everywhere-noise residual
reports as +inf (an exact solution to working precision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import fields as F
from .conformal import Density, s_curvature_field
from .errors import (
    FitFailure,
    NonpositiveS,
    ObstructionOrder,
    OrderNotMet,
)
from .fields import ScalarField
from .hypersurface import Embedding, fundamental_forms
from .jets import Jet

__all__ = [
    "DefiningDensity",
    "ObstructionSample",
    "defining_density",
    "normalize",
    "improve",
    "expand",
    "residual_order",
    "obstruction",
    "improvement_coefficient",
]

NOISE_FLOOR = 1e-13
DEFAULT_LADDER = (1e-4, 1e-1)
DEFAULT_LADDER_POINTS = 8


@dataclass
class DefiningDensity:
    """A defining density with its zero locus and verified unit order."""

    density: Density
    embedding: Embedding | None = None
    unit_order: int = 0

    @property
    def dim(self) -> int:
        return self.density.metric.dim

    @property
    def s_field(self) -> ScalarField:
        return s_curvature_field(self.density)

    def foot_point(self, param=None) -> tuple[float, ...]:
        if self.embedding is None:
            raise FitFailure("no embedding attached; pass an explicit point")
        u = param if param is not None else self.embedding.sample_param
        return self.embedding.position(u)

    def ray_direction(self, point) -> np.ndarray:
        """Metric-unit conormal direction of the attached density at a point."""
        g = self.density.metric
        d = self.dim
        grad = np.array(
            [self.density.rep.jet(point, 1).derivative(a).value for a in range(d)]
        )
        ginv = g.inverse_values(point)
        norm2 = float(grad @ ginv @ grad)
        if norm2 <= 0.0:
            raise FitFailure("density gradient vanishes at the foot point")
        return grad / math.sqrt(norm2)


def defining_density(
    density: Density, embedding: Embedding | None = None
) -> DefiningDensity:
    """Wrap a weight-1 density, checking S > 0 at the working point."""
    if density.weight != 1:
        raise NonpositiveS("a defining density must have weight 1")
    dd = DefiningDensity(density=density, embedding=embedding)
    probe = _probe_point(dd)
    s0 = dd.s_field.value(probe)
    if s0 <= 0.0:
        raise NonpositiveS(f"S = {s0:g} <= 0 at the probe point {probe}")
    return dd


def _probe_point(dd: DefiningDensity) -> tuple[float, ...]:
    if dd.embedding is not None:
        return dd.foot_point()
    return tuple(0.0 for _ in range(dd.dim))


def improvement_coefficient(d: int, k: int) -> float:
    """λ_k = −d / (2 (k+1) (d−k)); undefined exactly at the obstructed order."""
    if k == d:
        raise ObstructionOrder(
            f"the order-{d} correction is obstructed: its coefficient vanishes"
        )
    return -d / (2.0 * (k + 1) * (d - k))


def _guarded_sqrt_s(s_field: ScalarField) -> ScalarField:
    def fn(p, n):
        j = s_field.jet(p, n)
        if j.value <= 0.0:
            raise NonpositiveS(f"S = {j.value:g} <= 0 at {p}")
        from . import jets as J

        return J.sqrt(j)

    return ScalarField(s_field.chart, fn)


def normalize(dd: DefiningDensity) -> DefiningDensity:
    """First-order unit normalization σ̂ = σ / sqrt(S(σ))."""
    s = s_curvature_field(dd.density)
    probe = _probe_point(dd)
    if s.value(probe) <= 0.0:
        raise NonpositiveS(f"S <= 0 at the probe point {probe}")
    new_rep = dd.density.rep / _guarded_sqrt_s(s)
    new_density = Density(1, dd.density.metric, new_rep)
    return DefiningDensity(
        density=new_density, embedding=dd.embedding, unit_order=max(dd.unit_order, 1)
    )


def improve(dd: DefiningDensity, k: int, verify: bool = True) -> DefiningDensity:
    """One expansion step: order k to order k+1.

    The input must satisfy S(σ) − 1 = O(σ^k); with ``verify`` the fitted
    vanishing order is checked at the attached foot point.
    """
    d = dd.dim
    if not 1 <= k:
        raise OrderNotMet("the improvement order must be at least 1")
    if k > d:
        raise ObstructionOrder(f"no improvement steps exist beyond order {d}")
    lam = improvement_coefficient(d, k)  # raises at k == d
    if verify:
        recorded = dd.unit_order
        if recorded < k:
            fitted = residual_order(dd)
            if fitted < k - 0.1:
                raise OrderNotMet(
                    f"residual vanishes to fitted order {fitted:.2f} < {k}"
                )
    s = s_curvature_field(dd.density)
    new_rep = dd.density.rep * (1.0 + (s - 1.0) * lam)
    new_density = Density(1, dd.density.metric, new_rep)
    return DefiningDensity(
        density=new_density, embedding=dd.embedding, unit_order=k + 1
    )


def expand(dd: DefiningDensity, target_order: int, verify: bool = False) -> DefiningDensity:
    """normalize, then improve through k = 1 .. target_order−1."""
    d = dd.dim
    if target_order > d:
        raise ObstructionOrder(
            f"smooth expansions stop at order {d}; {target_order} was requested"
        )
    out = normalize(dd)
    for k in range(1, target_order):
        out = improve(out, k, verify=verify)
    return out


# --- residual fitting -------------------------------------------------------------


def _ray_points(
    dd: DefiningDensity, point, ladder: Sequence[float]
) -> list[tuple[float, ...]]:
    direction = dd.ray_direction(point)
    return [tuple(np.asarray(point) + s * direction) for s in ladder]


def residual_order(
    dd: DefiningDensity,
    point=None,
    ladder_range: tuple[float, float] = DEFAULT_LADDER,
    ladder_points: int = DEFAULT_LADDER_POINTS,
) -> float:
    """Fitted vanishing order of S − 1 at Σ along the conormal ray."""
    point = tuple(point) if point is not None else _probe_point(dd)
    ladder = np.geomspace(ladder_range[0], ladder_range[1], ladder_points)
    pts = _ray_points(dd, point, ladder)
    s_field = dd.s_field
    xs, ys = [], []
    for p in pts:
        res = abs(s_field.value(p) - 1.0)
        sig = abs(dd.density.rep.value(p))
        if res <= NOISE_FLOOR or sig <= NOISE_FLOOR:
            continue
        xs.append(math.log(sig))
        ys.append(math.log(res))
    if len(xs) < 3:
        return math.inf
    xs_a, ys_a = np.array(xs), np.array(ys)
    denom = float(((xs_a - xs_a.mean()) ** 2).sum())
    if denom < 1e-12:
        raise FitFailure("ladder points are degenerate in log|σ|")
    slope = float(((xs_a - xs_a.mean()) * (ys_a - ys_a.mean())).sum() / denom)
    return slope


@dataclass
class ObstructionSample:
    point: tuple[float, ...]
    value: float  # weight −d density, reference trivialization


def obstruction(dd: DefiningDensity, point=None) -> ObstructionSample:
    """B at a surface point: the σ^d Taylor residue of S − 1 along the ray.

    Requires an input expanded to order d.  The residue is read off from
    one-dimensional jets along the conormal ray: with
    S − 1 = Σ_{j} a_j s^j and σ = c₁ s + O(s²) on the ray, B = a_d / c₁^d
    (lower a_j vanish to working precision by construction).
    """
    d = dd.dim
    if dd.unit_order < d:
        raise OrderNotMet(
            f"obstruction extraction needs unit order {d}; have {dd.unit_order}"
        )
    point = tuple(point) if point is not None else _probe_point(dd)
    direction = dd.ray_direction(point)
    s_jet = dd.s_field.jet(point, d)
    sigma_jet = dd.density.rep.jet(point, 1)
    a_d = _ray_coefficient(s_jet, direction, d)
    c1 = float(
        sum(sigma_jet.derivative(a).value * direction[a] for a in range(d))
    )
    if abs(c1) < 1e-8:
        raise FitFailure("the defining density is degenerate along the ray")
    return ObstructionSample(point=point, value=a_d / c1**d)


def _ray_coefficient(jet: Jet, direction: np.ndarray, degree: int) -> float:
    """Coefficient of s^degree in the restriction of a jet to a straight ray."""
    total = 0.0
    shape = jet.shape
    for mi, c in zip(shape.indices, jet.coeffs):
        if sum(mi) != degree or c == 0.0:
            continue
        mono = 1.0
        for var, m in enumerate(mi):
            if m:
                mono *= direction[var] ** m
        total += c * mono
    return total
