"""Standard tractor calculus in a choice of scale.

Representation.  A tractor of weight w over a chart with reference metric ḡ
is stored as three slot components (top, middle covector, bottom), each the
ḡ-trivialized representative of a density of weight (w+1, w+1, w−1)
respectively, together with a *scale* label: a positive weight-1 density τ
that fixes which splitting of the bundle the components refer to.  With this
convention two useful facts become exact arithmetic identities:

  * the tractor metric  h(U, V) = u⁺v⁻ + u⁻v⁺ + ḡ⁻¹(u, v)  does not involve
    the scale label at all, so preservation of h under a change of scale is
    an algebraic identity rather than an approximation;
  * the top slot never changes under a change of scale (it is the projecting
    part).

The change of scale from τ to τ' maps, with Υ = d log(τ/τ'),
    (v⁺, v, v⁻)  ->  (v⁺, v + Υ v⁺, v⁻ − ḡ⁻¹(Υ, v) − ½ |Υ|² v⁺).
Any sign of Υ preserves h; this orientation is the one under which the
scale tractor of a fixed density is the same abstract tractor in every
scale (equivalently, it matches the metric-labelled transformation with
conformal factor g_τ' = e^{2ω} g_τ, Υ = dω).

The scale's metric g_τ = t⁻²ḡ drives the connection.  In the τ-trivialized
components the connection reads, slotwise per direction,
    (∇v⁺ − v,  ∇v + v⁺ P + v⁻ g_τ,  ∇v⁻ − P(v, ·)),
with P the Schouten tensor of g_τ; components are converted to and from the
ḡ-trivialization by powers of t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import fields as F
from .conformal import Density, s_curvature_field
from .errors import (
    NonpositiveScale,
    ScaleMismatch,
    SingularMetric,
    StepFailure,
)
from .fields import Chart, ScalarField
from .geometry import (
    MetricField,
    inverse_metric_jets,
    j_field,
    laplacian_field,
    point_connection,
)
from .jets import Jet

__all__ = [
    "Scale",
    "TractorSection",
    "TractorValue",
    "Curve",
    "canonical_tractor",
    "scale_tractor",
    "thomas_D",
    "change_scale",
    "tractor_metric",
    "tractor_metric_field",
    "tractor_gram",
    "signature_counts",
    "tractor_derivative",
    "laplace_robin",
    "normal_tractor",
    "parallel_transport",
    "slot_distance",
]


class Scale:
    """A true scale: strictly positive weight-1 density labelling a metric."""

    def __init__(self, density: Density):
        if density.weight != 1:
            raise NonpositiveScale("a scale must be a weight-1 density")
        self.base_metric = density.metric
        rep = density.rep
        self.is_reference = rep.constant_value == 1.0

        def guarded(p, n):
            j = rep.jet(p, n)
            if j.value <= 0.0:
                raise NonpositiveScale(f"scale value {j.value:g} <= 0 at {p}")
            return j

        self.rep = rep if self.is_reference else ScalarField(rep.chart, guarded)
        self._metric: MetricField | None = None

    @classmethod
    def reference(cls, metric: MetricField) -> "Scale":
        return cls(Density(1, metric, ScalarField.constant(metric.chart, 1.0)))

    def metric(self) -> MetricField:
        """The metric g_τ = t⁻² ḡ labelled by this scale."""
        if self.is_reference:
            return self.base_metric
        if self._metric is None:
            self._metric = self.base_metric.scaled(1.0 / (self.rep * self.rep))
        return self._metric


@dataclass
class TractorSection:
    """Tractor field: ḡ-trivialized slot components plus a scale label."""

    metric: MetricField
    scale: Scale
    weight: float
    top: ScalarField
    mid: tuple[ScalarField, ...]
    bot: ScalarField

    @property
    def chart(self) -> Chart:
        return self.metric.chart

    def at(self, point) -> "TractorValue":
        pt = tuple(float(x) for x in point)
        return TractorValue(
            point=pt,
            metric=self.metric,
            scale=self.scale,
            weight=self.weight,
            top=self.top.value(pt),
            mid=np.array([m.value(pt) for m in self.mid]),
            bot=self.bot.value(pt),
        )


@dataclass
class TractorValue:
    """Tractor at a single point (same slot conventions as TractorSection)."""

    point: tuple[float, ...]
    metric: MetricField
    scale: Scale
    weight: float
    top: float
    mid: np.ndarray
    bot: float


def _require_same_geometry(u, v) -> None:
    if u.metric is not v.metric:
        raise ScaleMismatch("tractor operands use different reference metrics")


def canonical_tractor(metric: MetricField, scale: Scale | None = None) -> TractorSection:
    """X = (0, 0, 1): weight-1, identical components in every scale."""
    chart = metric.chart
    scale = scale or Scale.reference(metric)
    zero = ScalarField.constant(chart, 0.0)
    return TractorSection(
        metric=metric,
        scale=scale,
        weight=1.0,
        top=zero,
        mid=tuple(zero for _ in range(chart.dim)),
        bot=ScalarField.constant(chart, 1.0),
    )


def scale_tractor(sigma: Density, scale: Scale | None = None) -> TractorSection:
    """The tractor (σ, ∇σ, −(Δ+J)σ/d) of a weight-1 density, in ``scale``."""
    if sigma.weight != 1:
        raise NonpositiveScale("scale tractors are built from weight-1 densities")
    gbar = sigma.metric
    d = gbar.dim
    scale = scale or Scale.reference(gbar)
    f = sigma.rep
    if scale.is_reference:
        mid = tuple(f.partial(a) for a in range(d))
        bot = (laplacian_field(gbar, f) + j_field(gbar) * f) * (-1.0 / d)
    else:
        t = scale.rep
        gt = scale.metric()
        ft = f / t
        log_t = F.log(t)
        mid = tuple(f.partial(a) - f * log_t.partial(a) for a in range(d))
        bot = (laplacian_field(gt, ft) + j_field(gt) * ft) * (-1.0 / d) / t
    return TractorSection(
        metric=gbar, scale=scale, weight=0.0, top=f, mid=mid, bot=bot
    )


def thomas_D(density: Density, scale: Scale | None = None) -> TractorSection:
    """Tractor-valued second-order operator on a scalar density.

    Slots in the labelling scale: (w(d+2w−2) f, (d+2w−2) ∇f, −(Δ + wJ) f),
    returned as a tractor of weight w−1 in ḡ-trivialized components.
    """
    gbar = density.metric
    d = gbar.dim
    w = density.weight
    scale = scale or Scale.reference(gbar)
    coeff = d + 2.0 * w - 2.0
    f = density.rep
    if scale.is_reference:
        top = f * (w * coeff)
        mid = tuple(f.partial(a) * coeff for a in range(d))
        bot = (laplacian_field(gbar, f) + j_field(gbar) * f * w) * (-1.0)
    else:
        t = scale.rep
        gt = scale.metric()
        ft = f / (t**w) if w != 0 else f
        tw = t**w if w != 0 else ScalarField.constant(gbar.chart, 1.0)
        top = ft * tw * (w * coeff)
        mid = tuple(ft.partial(a) * tw * coeff for a in range(d))
        bot = (laplacian_field(gt, ft) + j_field(gt) * ft * w) * (-1.0) * (t ** (w - 2.0))
    return TractorSection(
        metric=gbar, scale=scale, weight=w - 1.0, top=top, mid=mid, bot=bot
    )


# --- scale changes ------------------------------------------------------------


def _upsilon_fields(old: Scale, new: Scale) -> tuple[ScalarField, ...]:
    # gradient of log(old/new): the orientation that keeps the scale tractor
    # of a fixed density the same abstract tractor in every scale
    chart = old.base_metric.chart
    ratio = old.rep / new.rep
    log_ratio = F.log(ratio)
    return tuple(log_ratio.partial(a) for a in range(chart.dim))


def change_scale(U, new_scale: Scale):
    """Re-express a tractor in another scale; h and the top slot are fixed."""
    if isinstance(U, TractorValue):
        return _change_scale_value(U, new_scale)
    if U.metric is not new_scale.base_metric:
        raise ScaleMismatch("the new scale lives over a different reference metric")
    old = U.scale
    if old is new_scale or (old.is_reference and new_scale.is_reference):
        return U
    ups = _upsilon_fields(old, new_scale)
    d = U.metric.dim
    ginv = [[U.metric.inverse_field(a, b) for b in range(d)] for a in range(d)]
    mid = tuple(U.mid[a] + ups[a] * U.top for a in range(d))
    cross = None
    ups_sq = None
    for a in range(d):
        for b in range(d):
            t1 = ginv[a][b] * ups[a] * U.mid[b]
            t2 = ginv[a][b] * ups[a] * ups[b]
            cross = t1 if cross is None else cross + t1
            ups_sq = t2 if ups_sq is None else ups_sq + t2
    bot = U.bot - cross - ups_sq * 0.5 * U.top
    return TractorSection(
        metric=U.metric,
        scale=new_scale,
        weight=U.weight,
        top=U.top,
        mid=mid,
        bot=bot,
    )


def _change_scale_value(U: TractorValue, new_scale: Scale) -> TractorValue:
    if U.metric is not new_scale.base_metric:
        raise ScaleMismatch("the new scale lives over a different reference metric")
    old = U.scale
    if old is new_scale or (old.is_reference and new_scale.is_reference):
        return U
    pt = U.point
    ups = np.array([u.value(pt) for u in _upsilon_fields(old, new_scale)])
    ginv = U.metric.inverse_values(pt)
    mid = U.mid + ups * U.top
    bot = U.bot - float(ginv @ ups @ U.mid) - 0.5 * float(ups @ ginv @ ups) * U.top
    return TractorValue(
        point=pt,
        metric=U.metric,
        scale=new_scale,
        weight=U.weight,
        top=U.top,
        mid=mid,
        bot=bot,
    )


# --- tractor metric -----------------------------------------------------------


def tractor_metric(U, V, point=None) -> float:
    """h(U, V) as a number (the ḡ-representative of a weight wᵤ+wᵥ density)."""
    if isinstance(U, TractorValue) and isinstance(V, TractorValue):
        _require_same_geometry(U, V)
        if U.point != V.point:
            raise ScaleMismatch("tractor values live at different points")
        if U.scale is not V.scale:
            V = _change_scale_value(V, U.scale)
        ginv = U.metric.inverse_values(U.point)
        return U.top * V.bot + U.bot * V.top + float(U.mid @ ginv @ V.mid)
    if point is None:
        raise ValueError("a point is required for tractor sections")
    return tractor_metric(U.at(point), V.at(point))


def tractor_metric_field(U: TractorSection, V: TractorSection) -> ScalarField:
    _require_same_geometry(U, V)
    if U.scale is not V.scale:
        V = change_scale(V, U.scale)
    d = U.metric.dim
    ginv = [[U.metric.inverse_field(a, b) for b in range(d)] for a in range(d)]
    h = U.top * V.bot + U.bot * V.top
    for a in range(d):
        for b in range(d):
            h = h + ginv[a][b] * U.mid[a] * V.mid[b]
    return h


def tractor_gram(metric: MetricField, point) -> np.ndarray:
    """Gram matrix of h on the slot basis (top, middle coordinates, bottom)."""
    d = metric.dim
    gram = np.zeros((d + 2, d + 2))
    gram[0, d + 1] = gram[d + 1, 0] = 1.0
    gram[1 : d + 1, 1 : d + 1] = metric.inverse_values(point)
    return gram


def signature_counts(metric: MetricField, point) -> tuple[int, int]:
    """(positive, negative) eigenvalue counts of the tractor metric."""
    eig = np.linalg.eigvalsh(tractor_gram(metric, point))
    return int((eig > 0).sum()), int((eig < 0).sum())


# --- connection ----------------------------------------------------------------


def _trivialized_slots(U: TractorSection):
    """Slot fields in the labelling scale's own trivialization."""
    if U.scale.is_reference:
        return U.top, U.mid, U.bot
    t = U.scale.rep
    w = U.weight
    up = t ** (-(w + 1.0))
    dn = t ** (-(w - 1.0))
    return U.top * up, tuple(m * up for m in U.mid), U.bot * dn


def tractor_derivative(U: TractorSection, direction: Sequence[float], point) -> TractorValue:
    """Tractor connection applied to U, contracted with a coordinate direction.

    The result is a tractor value of the same weight, in the same scale.
    Metric compatibility d h(U,V) = h(∇U,V) + h(U,∇V) holds to roundoff.
    """
    pt = tuple(float(x) for x in point)
    xi = np.asarray(direction, dtype=float)
    d = U.metric.dim
    gt = U.scale.metric()
    conn = point_connection(gt, pt)
    a_f, b_f, c_f = _trivialized_slots(U)

    a_j = a_f.jet(pt, 1)
    b_j = [bf.jet(pt, 1) for bf in b_f]
    c_j = c_f.jet(pt, 1)
    a_val = a_j.value
    b_val = np.array([bj.value for bj in b_j])
    c_val = c_j.value
    da = np.array([a_j.derivative(k).value for k in range(d)])
    dc = np.array([c_j.derivative(k).value for k in range(d)])
    db = np.array([[b_j[c].derivative(k).value for c in range(d)] for k in range(d)])

    P = conn.schouten
    gamma = conn.gamma
    gmat = conn.g
    ginv = conn.ginv

    top_out = float(xi @ (da - b_val))
    nabla_b = db - np.einsum("fec,f->ec", gamma, b_val)
    mid_out = xi @ nabla_b + a_val * (xi @ P) + c_val * (xi @ gmat)
    bot_out = float(xi @ dc) - float(xi @ P @ ginv @ b_val)

    if not U.scale.is_reference:
        t = U.scale.rep.value(pt)
        w = U.weight
        top_out *= t ** (w + 1.0)
        mid_out = mid_out * t ** (w + 1.0)
        bot_out *= t ** (w - 1.0)
    return TractorValue(
        point=pt,
        metric=U.metric,
        scale=U.scale,
        weight=U.weight,
        top=top_out,
        mid=np.asarray(mid_out, dtype=float),
        bot=bot_out,
    )


def laplace_robin(sigma_or_tractor, density: Density, point) -> float:
    """h(I, D f): the first-order operator attached to a scale density."""
    if isinstance(sigma_or_tractor, TractorSection):
        I = sigma_or_tractor
    else:
        I = scale_tractor(sigma_or_tractor)
    Df = thomas_D(density, scale=I.scale)
    return tractor_metric(I, Df, point)


def normal_tractor(embedding, param_point) -> TractorValue:
    """N = (0, n̂, −H) at an embedded point, in the reference trivialization."""
    from .hypersurface import fundamental_forms

    forms = fundamental_forms(embedding, param_point)
    return TractorValue(
        point=forms.position,
        metric=embedding.metric,
        scale=Scale.reference(embedding.metric),
        weight=0.0,
        top=0.0,
        mid=forms.conormal,
        bot=-forms.mean_curvature,
    )


def slot_distance(U: TractorValue, V: TractorValue) -> float:
    if U.scale is not V.scale and not (U.scale.is_reference and V.scale.is_reference):
        V = _change_scale_value(V, U.scale)
    return max(
        abs(U.top - V.top),
        float(np.abs(U.mid - V.mid).max()),
        abs(U.bot - V.bot),
    )


# --- parallel transport ----------------------------------------------------------


@dataclass
class Curve:
    """Parametrized chart path with jet-exact velocity."""

    chart: Chart
    components: tuple  # callables t -> Jet(1 var) or ExprAst-backed fields

    @classmethod
    def from_exprs(cls, chart: Chart, texts: Sequence[str], params=None) -> "Curve":
        from . import expr as exprmod

        asts = [exprmod.parse(t) if isinstance(t, str) else t for t in texts]
        if len(asts) != chart.dim:
            raise ValueError("need one path expression per chart coordinate")
        params = dict(params or {})

        def make(ast):
            return lambda t: exprmod.eval_jet(ast, {"t": t}, 1, params)

        return cls(chart=chart, components=tuple(make(a) for a in asts))

    def position(self, t: float) -> tuple[float, ...]:
        return tuple(c(t).value for c in self.components)

    def velocity(self, t: float) -> np.ndarray:
        return np.array([c(t).derivative(0).value for c in self.components])


def _transport_rhs(metric: MetricField, curve: Curve, t: float, y: np.ndarray) -> np.ndarray:
    d = metric.dim
    p = curve.position(t)
    xi = curve.velocity(t)
    conn = point_connection(metric, p)
    top, mid, bot = y[0], y[1 : d + 1], y[d + 1]
    dtop = float(xi @ mid)
    # dv_b/dt = ξ^a Γ^c_{ab} v_c − v⁺ P_{ab} ξ^a − v⁻ g_{ab} ξ^a
    dmid = (
        np.einsum("a,cab,c->b", xi, conn.gamma, mid)
        - top * (xi @ conn.schouten)
        - bot * (xi @ conn.g)
    )
    dbot = float(xi @ conn.schouten @ conn.ginv @ mid)
    out = np.empty(d + 2)
    out[0] = dtop
    out[1 : d + 1] = dmid
    out[d + 1] = dbot
    return out


def _rk4(metric: MetricField, curve: Curve, y0: np.ndarray, t0: float, t1: float, steps: int) -> np.ndarray:
    h = (t1 - t0) / steps
    y = y0.copy()
    t = t0
    for _ in range(steps):
        k1 = _transport_rhs(metric, curve, t, y)
        k2 = _transport_rhs(metric, curve, t + h / 2, y + (h / 2) * k1)
        k3 = _transport_rhs(metric, curve, t + h / 2, y + (h / 2) * k2)
        k4 = _transport_rhs(metric, curve, t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def parallel_transport(
    U0: TractorValue,
    curve: Curve,
    t_span: tuple[float, float] = (0.0, 1.0),
    steps: int = 128,
    tol: float = 1e-8,
    max_steps: int = 8192,
) -> TractorValue:
    """Solve ∇U = 0 along the curve with classical 4th-order steps.

    The step count is doubled until the transported tractor agrees with the
    half-step solution and the tractor norm h(U,U) is conserved to ``tol``.
    """
    if not U0.scale.is_reference:
        U0 = _change_scale_value(U0, Scale.reference(U0.metric))
    metric = U0.metric
    d = metric.dim
    t0, t1 = t_span
    start = curve.position(t0)
    if tuple(start) != tuple(U0.point):
        if max(abs(a - b) for a, b in zip(start, U0.point)) > 1e-10:
            raise ValueError("the initial tractor does not sit at the curve start")
    y0 = np.empty(d + 2)
    y0[0] = U0.top
    y0[1 : d + 1] = U0.mid
    y0[d + 1] = U0.bot
    h0 = tractor_metric(U0, U0)

    def wrap(y: np.ndarray) -> TractorValue:
        return TractorValue(
            point=curve.position(t1),
            metric=metric,
            scale=U0.scale,
            weight=U0.weight,
            top=float(y[0]),
            mid=y[1 : d + 1].copy(),
            bot=float(y[d + 1]),
        )

    n = steps
    prev = _rk4(metric, curve, y0, t0, t1, n)
    while True:
        n *= 2
        if n > max_steps:
            raise StepFailure(
                f"transport did not reach tolerance {tol:g} within {max_steps} steps"
            )
        cur = _rk4(metric, curve, y0, t0, t1, n)
        drift = abs(tractor_metric(wrap(cur), wrap(cur)) - h0)
        scale = max(1.0, float(np.abs(cur).max()))
        if np.abs(cur - prev).max() <= tol * scale and drift <= tol * max(1.0, abs(h0)):
            return wrap(cur)
        prev = cur
