"""Conformal densities and the scalar invariant of a weight-1 density.

A weight-w density is stored as a pair (reference metric, representative
function); changing the representative by [g, f] -> [Ω²g, Ωʷ f] describes
the same geometric object.  Nothing here assumes that invariance: it is a
property the test suite checks by recomputing derived scalars after random
rescalings.

For a weight-1 density σ with reference metric ḡ the fundamental scalar is

    S(ḡ, σ) = |dσ|²_ḡ − (2σ/d) (Δσ + J σ),

computed in the reference trivialization.  It extends −Sc^g / (d(d−1)) of
the rescaled metric g = σ⁻²ḡ across the zero locus of σ, and equals the
squared length of the scale tractor built from σ.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonpositiveFactor
from .fields import ScalarField
from .geometry import (
    MetricField,
    gradient_jets,
    inverse_metric_jets,
    laplacian_jet,
    schouten_jets,
)
from .jets import Jet

__all__ = [
    "Density",
    "rescale",
    "s_curvature",
    "s_curvature_jet",
    "s_curvature_field",
]


@dataclass(frozen=True)
class Density:
    """Conformal density of weight ``weight`` relative to ``metric``."""

    weight: float
    metric: MetricField
    rep: ScalarField

    def __post_init__(self):
        if self.rep.chart != self.metric.chart:
            raise ValueError("density representative must live on the metric chart")

    @property
    def chart(self):
        return self.metric.chart

    def value(self, point) -> float:
        return self.rep.value(point)


def _positive_guard(omega: ScalarField) -> ScalarField:
    """Wrap a conformal factor so nonpositive values fail loudly."""

    def fn(p, n):
        j = omega.jet(p, n)
        if j.value <= 0.0:
            raise NonpositiveFactor(
                f"conformal factor {j.value:g} <= 0 at {p}"
            )
        return j

    return ScalarField(omega.chart, fn)


def rescale(density: Density, omega: ScalarField) -> Density:
    """Re-trivialize: [g, f] -> [Ω²g, Ωʷ f].  Ω must be positive."""
    omega = _positive_guard(omega)
    new_metric = density.metric.scaled(omega * omega)
    w = density.weight
    if w == 0:
        new_rep = density.rep
    elif w == 1:
        new_rep = omega * density.rep
    else:
        new_rep = (omega**w) * density.rep
    return Density(weight=w, metric=new_metric, rep=new_rep)


def s_curvature_jet(density: Density, point, order: int) -> Jet:
    """Jet of S(ḡ, σ) at a point; ingredients are requested two orders up."""
    if density.weight != 1:
        raise ValueError("the S-curvature is defined for weight-1 densities")
    g = density.metric
    f = density.rep
    d = g.dim
    pt = tuple(float(x) for x in point)
    ginv = inverse_metric_jets(g, pt, order)
    df = gradient_jets(g, f, pt, order)
    lap = laplacian_jet(g, f, pt, order)
    J = schouten_jets(g, pt, order).J
    fj = f.jet(pt, order)
    grad2 = None
    for a in range(d):
        for b in range(d):
            term = ginv[a][b] * df[a] * df[b]
            grad2 = term if grad2 is None else grad2 + term
    return grad2 - fj * (lap + J * fj) * (2.0 / d)


def s_curvature(density: Density, point) -> float:
    return s_curvature_jet(density, point, 0).value


def s_curvature_field(density: Density) -> ScalarField:
    return ScalarField(
        density.chart, lambda p, n: s_curvature_jet(density, p, n)
    )
