"""Metric fields and curvature operators on coordinate charts.

Sign and normalization conventions used throughout the package:

  Christoffel   Γ^a_{bc} = ½ g^{ad} (∂_b g_{dc} + ∂_c g_{db} − ∂_d g_{bc})
  Riemann       R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb}
                            + Γ^a_{ce} Γ^e_{db} − Γ^a_{de} Γ^e_{cb}
  Ricci         R_{bd} = R^a_{bad};   Sc = g^{bd} R_{bd}
                (the unit round d-sphere has Sc = d(d−1))
  Laplacian     Δf = g^{ab} (∂_a ∂_b f − Γ^c_{ab} ∂_c f), the trace of the
                covariant Hessian; on the unit round sphere Δh = −d·h for
                the height function h.
  Schouten      P = (Ric − J g)/(d−2) with trace J = Sc/(2(d−1)); the
                trace-free part is written P̊.

All derived quantities are computed as jets of a requested order, with
ingredient orders inflated automatically (curvature of order n needs metric
jets of order n+2), and cached per (point, order) on the metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import NonpositiveFactor, SingularMetric
from .fields import Chart, ScalarField
from .jets import Jet

__all__ = [
    "MetricField",
    "CurvatureBundle",
    "DiffOps",
    "metric_jets",
    "inverse_metric_jets",
    "christoffel_jets",
    "riemann_jets",
    "ricci_jets",
    "scalar_curvature_jet",
    "schouten_jets",
    "curvature",
    "gradient_jets",
    "hessian_jets",
    "laplacian_jet",
    "differential_operators",
    "laplacian_field",
    "j_field",
    "conformal_transform_check",
    "einstein_divergence",
    "point_connection",
]


class MetricField:
    """Symmetric metric on a chart, components given as scalar fields."""

    def __init__(
        self,
        chart: Chart,
        comps,
        signature: str = "riemannian",
        flat: bool = False,
    ):
        if chart.dim < 2:
            raise ValueError("metrics need a chart of dimension at least 2")
        if signature not in ("riemannian", "lorentzian"):
            raise ValueError(f"unknown signature tag {signature!r}")
        d = chart.dim
        grid: list[list[ScalarField]] = [[None] * d for _ in range(d)]  # type: ignore[list-item]
        for i in range(d):
            for j in range(i, d):
                entry = comps[i][j]
                if not isinstance(entry, ScalarField):
                    entry = ScalarField.constant(chart, float(entry))
                # share the object across the symmetric pair so jet caches merge
                grid[i][j] = entry
                grid[j][i] = entry
        self.chart = chart
        self.comps: tuple[tuple[ScalarField, ...], ...] = tuple(
            tuple(row) for row in grid
        )
        self.signature = signature
        self.flat = flat
        self._derived: dict = {}

    @property
    def dim(self) -> int:
        return self.chart.dim

    @classmethod
    def from_exprs(
        cls,
        chart: Chart,
        comps_text,
        params: Mapping[str, float] | None = None,
        signature: str = "riemannian",
        flat: bool = False,
    ) -> "MetricField":
        comps = [
            [
                ScalarField.from_expr(chart, comps_text[i][j], params)
                for j in range(chart.dim)
            ]
            for i in range(chart.dim)
        ]
        return cls(chart, comps, signature=signature, flat=flat)

    @classmethod
    def euclidean(cls, chart: Chart) -> "MetricField":
        comps = [
            [1.0 if i == j else 0.0 for j in range(chart.dim)]
            for i in range(chart.dim)
        ]
        return cls(chart, comps, flat=True)

    @classmethod
    def minkowski(cls, chart: Chart) -> "MetricField":
        """Flat metric with the last coordinate timelike."""
        d = chart.dim
        comps = [
            [(-1.0 if i == d - 1 else 1.0) if i == j else 0.0 for j in range(d)]
            for i in range(d)
        ]
        return cls(chart, comps, signature="lorentzian", flat=True)

    def scaled(self, factor: ScalarField) -> "MetricField":
        """Pointwise rescaling g -> factor * g (factor a weight-0 field)."""
        comps = [
            [self.comps[i][j] * factor for j in range(self.dim)]
            for i in range(self.dim)
        ]
        return MetricField(self.chart, comps, signature=self.signature)

    def jets(self, point: Sequence[float], order: int):
        pt = tuple(float(x) for x in point)
        key = ("g", pt, order)
        cached = self._derived.get(key)
        if cached is None:
            cached = [
                [self.comps[i][j].jet(pt, order) for j in range(self.dim)]
                for i in range(self.dim)
            ]
            self._derived[key] = cached
        return cached

    def values(self, point: Sequence[float]) -> np.ndarray:
        gj = self.jets(point, 0)
        return np.array([[gj[i][j].value for j in range(self.dim)] for i in range(self.dim)])

    def inverse_values(self, point: Sequence[float]) -> np.ndarray:
        g = self.values(point)
        det = np.linalg.det(g)
        if not np.isfinite(det) or abs(det) < 1e-14:
            raise SingularMetric(f"metric is singular at {tuple(point)}")
        return np.linalg.inv(g)

    def inverse_field(self, i: int, j: int) -> ScalarField:
        key = ("ginv_field", i, j)
        cached = self._derived.get(key)
        if cached is None:
            cached = ScalarField(
                self.chart,
                lambda p, n, i=i, j=j: inverse_metric_jets(self, p, n)[i][j],
            )
            self._derived[key] = cached
        return cached


# --- jet-level curvature pipeline --------------------------------------------


def _cache(metric: MetricField, key, builder):
    cached = metric._derived.get(key)
    if cached is None:
        cached = builder()
        metric._derived[key] = cached
    return cached


def metric_jets(metric: MetricField, point, order: int):
    return metric.jets(point, order)


def _matmul(A, B):
    n = len(A)
    return [
        [sum((A[i][k] * B[k][j] for k in range(1, n)), A[i][0] * B[0][j]) for j in range(n)]
        for i in range(n)
    ]


def inverse_metric_jets(metric: MetricField, point, order: int):
    """Inverse metric jets via Newton iteration on the truncated ring."""
    pt = tuple(float(x) for x in point)

    def build():
        gj = metric.jets(pt, order)
        d = metric.dim
        g0 = np.array([[gj[i][j].value for j in range(d)] for i in range(d)])
        det = np.linalg.det(g0)
        if not np.isfinite(det) or abs(det) < 1e-14:
            raise SingularMetric(f"metric is singular at {pt}")
        x0 = np.linalg.inv(g0)
        X = [
            [Jet.constant(d, order, x0[i][j]) for j in range(d)]
            for i in range(d)
        ]
        if order == 0:
            return X
        steps = max(1, math.ceil(math.log2(order + 1)))
        for _ in range(steps):
            GX = _matmul(gj, X)
            # X <- X (2I - G X)
            corr = [
                [(-GX[i][j] if i != j else 2.0 - GX[i][j]) for j in range(d)]
                for i in range(d)
            ]
            X = _matmul(X, corr)
        return X

    return _cache(metric, ("ginv", pt, order), build)


def christoffel_jets(metric: MetricField, point, order: int):
    pt = tuple(float(x) for x in point)

    def build():
        d = metric.dim
        gj = metric.jets(pt, order + 1)
        ginv = inverse_metric_jets(metric, pt, order)
        dg = [
            [[gj[i][j].derivative(k) for j in range(d)] for i in range(d)]
            for k in range(d)
        ]
        gamma = [[[None] * d for _ in range(d)] for _ in range(d)]
        for b in range(d):
            for c in range(b, d):
                for a in range(d):
                    acc = None
                    for e in range(d):
                        term = (dg[b][e][c] + dg[c][e][b] - dg[e][b][c]) * ginv[a][e]
                        acc = term if acc is None else acc + term
                    val = acc * 0.5
                    gamma[a][b][c] = val
                    gamma[a][c][b] = val
        return gamma

    return _cache(metric, ("gamma", pt, order), build)


def ricci_jets(metric: MetricField, point, order: int):
    """Ricci tensor jets, assembled directly from Christoffel jets."""
    pt = tuple(float(x) for x in point)

    def build():
        d = metric.dim
        gamma = christoffel_jets(metric, pt, order + 1)
        dgamma = [
            [
                [[gamma[a][b][c].derivative(k) for c in range(d)] for b in range(d)]
                for a in range(d)
            ]
            for k in range(d)
        ]
        gam = [
            [[gamma[a][b][c].truncate(order) for c in range(d)] for b in range(d)]
            for a in range(d)
        ]
        ric = [[None] * d for _ in range(d)]
        for b in range(d):
            for e in range(b, d):
                acc = None
                for a in range(d):
                    t = dgamma[a][a][e][b] - dgamma[e][a][a][b]
                    for f in range(d):
                        t = t + gam[a][a][f] * gam[f][e][b] - gam[a][e][f] * gam[f][a][b]
                    acc = t if acc is None else acc + t
                ric[b][e] = acc
                ric[e][b] = acc
        return ric

    return _cache(metric, ("ricci", pt, order), build)


def riemann_jets(metric: MetricField, point, order: int):
    """Fully lowered curvature tensor jets R_{abcd}."""
    pt = tuple(float(x) for x in point)

    def build():
        d = metric.dim
        gamma = christoffel_jets(metric, pt, order + 1)
        gj = metric.jets(pt, order)
        dgamma = [
            [
                [[gamma[a][b][c].derivative(k) for c in range(d)] for b in range(d)]
                for a in range(d)
            ]
            for k in range(d)
        ]
        gam = [
            [[gamma[a][b][c].truncate(order) for c in range(d)] for b in range(d)]
            for a in range(d)
        ]
        riem_up = [
            [[[None] * d for _ in range(d)] for _ in range(d)] for _ in range(d)
        ]
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    for e in range(c + 1, d):
                        t = dgamma[c][a][e][b] - dgamma[e][a][c][b]
                        for f in range(d):
                            t = (
                                t
                                + gam[a][c][f] * gam[f][e][b]
                                - gam[a][e][f] * gam[f][c][b]
                            )
                        riem_up[a][b][c][e] = t
        zero = Jet.constant(d, order, 0.0)
        low = [[[[zero] * d for _ in range(d)] for _ in range(d)] for _ in range(d)]
        for b in range(d):
            for c in range(d):
                for e in range(c + 1, d):
                    for a in range(d):
                        acc = None
                        for f in range(d):
                            term = gj[a][f] * riem_up[f][b][c][e]
                            acc = term if acc is None else acc + term
                        low[a][b][c][e] = acc
                        low[a][b][e][c] = -acc
        return low

    return _cache(metric, ("riemann", pt, order), build)


def scalar_curvature_jet(metric: MetricField, point, order: int) -> Jet:
    pt = tuple(float(x) for x in point)

    def build():
        d = metric.dim
        ric = ricci_jets(metric, pt, order)
        ginv = inverse_metric_jets(metric, pt, order)
        acc = None
        for b in range(d):
            for e in range(d):
                term = ginv[b][e] * ric[b][e]
                acc = term if acc is None else acc + term
        return acc

    return _cache(metric, ("scalar", pt, order), build)


@dataclass
class SchoutenJets:
    P: list
    J: Jet
    P_tf: list


def schouten_jets(metric: MetricField, point, order: int) -> SchoutenJets:
    pt = tuple(float(x) for x in point)

    def build():
        d = metric.dim
        if d < 3:
            raise SingularMetric("the Schouten tensor needs dimension at least 3")
        ric = ricci_jets(metric, pt, order)
        sc = scalar_curvature_jet(metric, pt, order)
        gj = metric.jets(pt, order)
        J = sc * (1.0 / (2.0 * (d - 1)))
        P = [
            [(ric[i][j] - gj[i][j] * J) * (1.0 / (d - 2)) for j in range(d)]
            for i in range(d)
        ]
        P_tf = [
            [P[i][j] - gj[i][j] * (J * (1.0 / d)) for j in range(d)]
            for i in range(d)
        ]
        return SchoutenJets(P=P, J=J, P_tf=P_tf)

    return _cache(metric, ("schouten", pt, order), build)


# --- pointwise bundles --------------------------------------------------------


def _values(jet_grid) -> np.ndarray:
    def rec(node):
        if isinstance(node, Jet):
            return node.value
        return [rec(x) for x in node]

    return np.array(rec(jet_grid))


@dataclass
class CurvatureBundle:
    """All pointwise curvature data of a metric at a chart point."""

    point: tuple[float, ...]
    metric: np.ndarray
    metric_inv: np.ndarray
    christoffel: np.ndarray  # Γ[a,b,c] = Γ^a_{bc}
    riemann: np.ndarray  # R[a,b,c,d] = R_{abcd}
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray
    schouten_trace: float  # J
    schouten_tf: np.ndarray

    def validate(self, tol: float = 1e-9) -> float:
        """Max violation of the Riemann symmetries and first Bianchi identity."""
        R = self.riemann
        scale = max(1.0, np.abs(R).max())
        worst = 0.0
        worst = max(worst, np.abs(R + R.transpose(1, 0, 2, 3)).max())
        worst = max(worst, np.abs(R + R.transpose(0, 1, 3, 2)).max())
        worst = max(worst, np.abs(R - R.transpose(2, 3, 0, 1)).max())
        bianchi = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
        worst = max(worst, np.abs(bianchi).max())
        worst = max(worst, np.abs(self.ricci - self.ricci.T).max())
        d = len(self.metric)
        trP = float(np.einsum("ab,ab->", self.metric_inv, self.schouten))
        worst = max(worst, abs(trP - self.schouten_trace))
        trP0 = float(np.einsum("ab,ab->", self.metric_inv, self.schouten_tf))
        worst = max(worst, abs(trP0))
        if worst > tol * scale:
            raise SingularMetric(
                f"curvature self-check failed at {self.point}: residual {worst:g}"
            )
        return worst


def curvature(metric: MetricField, point) -> CurvatureBundle:
    """Pointwise curvature bundle (values of the jet pipeline at order 0)."""
    pt = tuple(float(x) for x in point)
    gamma = _values(christoffel_jets(metric, pt, 0))
    riem = _values(riemann_jets(metric, pt, 0))
    ric = _values(ricci_jets(metric, pt, 0))
    sch = schouten_jets(metric, pt, 0)
    return CurvatureBundle(
        point=pt,
        metric=metric.values(pt),
        metric_inv=metric.inverse_values(pt),
        christoffel=gamma,
        riemann=riem,
        ricci=ric,
        scalar=scalar_curvature_jet(metric, pt, 0).value,
        schouten=_values(sch.P),
        schouten_trace=sch.J.value,
        schouten_tf=_values(sch.P_tf),
    )


# --- differential operators ---------------------------------------------------


def gradient_jets(metric: MetricField, f: ScalarField, point, order: int):
    fj = f.jet(point, order + 1)
    return [fj.derivative(a) for a in range(metric.dim)]


def hessian_jets(metric: MetricField, f: ScalarField, point, order: int):
    d = metric.dim
    fj = f.jet(point, order + 2)
    gamma = christoffel_jets(metric, point, order)
    df = [fj.derivative(a).truncate(order) for a in range(d)]
    ddf = [[fj.derivative(a).derivative(b) for b in range(d)] for a in range(d)]
    hess = [[None] * d for _ in range(d)]
    for a in range(d):
        for b in range(a, d):
            acc = ddf[a][b]
            for c in range(d):
                acc = acc - gamma[c][a][b] * df[c]
            hess[a][b] = acc
            hess[b][a] = acc
    return hess


def laplacian_jet(metric: MetricField, f: ScalarField, point, order: int) -> Jet:
    d = metric.dim
    hess = hessian_jets(metric, f, point, order)
    ginv = inverse_metric_jets(metric, point, order)
    acc = None
    for a in range(d):
        for b in range(d):
            term = ginv[a][b] * hess[a][b]
            acc = term if acc is None else acc + term
    return acc


@dataclass
class DiffOps:
    gradient: np.ndarray  # covector ∂_a f
    gradient_vec: np.ndarray  # g^{ab} ∂_b f
    hessian: np.ndarray  # covariant Hessian
    laplacian: float


def differential_operators(metric: MetricField, f: ScalarField, point) -> DiffOps:
    pt = tuple(float(x) for x in point)
    grad = np.array([j.value for j in gradient_jets(metric, f, pt, 0)])
    hess = _values(hessian_jets(metric, f, pt, 0))
    ginv = metric.inverse_values(pt)
    return DiffOps(
        gradient=grad,
        gradient_vec=ginv @ grad,
        hessian=hess,
        laplacian=float(np.einsum("ab,ab->", ginv, hess)),
    )


def laplacian_field(metric: MetricField, f: ScalarField) -> ScalarField:
    return ScalarField(metric.chart, lambda p, n: laplacian_jet(metric, f, p, n))


def j_field(metric: MetricField) -> ScalarField:
    return ScalarField(metric.chart, lambda p, n: schouten_jets(metric, p, n).J)


# --- identities ----------------------------------------------------------------


def conformal_transform_check(metric: MetricField, omega: ScalarField, point) -> float:
    """Residual of the trace-free Schouten transformation law at a point.

    Both sides are produced by independent curvature computations: the left
    from the rescaled metric, the right from the original metric plus the
    gradient of log(omega).
    """
    pt = tuple(float(x) for x in point)
    w0 = omega.value(pt)
    if w0 <= 0.0:
        raise NonpositiveFactor(f"conformal factor {w0:g} <= 0 at {pt}")
    d = metric.dim
    g = metric.values(pt)
    ginv = metric.inverse_values(pt)

    from . import fields as fieldsmod

    log_omega = fieldsmod.log(omega)
    upsilon = np.array(
        [j.value for j in gradient_jets(metric, log_omega, pt, 0)]
    )
    hess_up = _values(hessian_jets(metric, log_omega, pt, 0))

    def tracefree(X: np.ndarray) -> np.ndarray:
        return X - g * (np.einsum("ab,ab->", ginv, X) / d)

    rhs = (
        curvature(metric, pt).schouten_tf
        - tracefree(hess_up)
        + tracefree(np.outer(upsilon, upsilon))
    )
    scaled = metric.scaled(omega * omega)
    lhs = curvature(scaled, pt).schouten_tf
    return float(np.abs(lhs - rhs).max())


def einstein_divergence(metric: MetricField, point) -> np.ndarray:
    """∇^a (Ric − ½ Sc g)_{ab}; vanishes identically (contracted Bianchi)."""
    pt = tuple(float(x) for x in point)
    d = metric.dim
    ric = ricci_jets(metric, pt, 1)
    sc = scalar_curvature_jet(metric, pt, 1)
    gj = metric.jets(pt, 1)
    T = [[ric[a][b] - gj[a][b] * sc * 0.5 for b in range(d)] for a in range(d)]
    Tval = _values(T)
    dT = np.array(
        [[[T[a][b].derivative(c).value for b in range(d)] for a in range(d)] for c in range(d)]
    )
    gamma = _values(christoffel_jets(metric, pt, 0))
    ginv = metric.inverse_values(pt)
    # ∇_c T_ab = ∂_c T_ab − Γ^e_{ca} T_eb − Γ^e_{cb} T_ae
    nabla = dT - np.einsum("eca,eb->cab", gamma, Tval) - np.einsum("ecb,ae->cab", gamma, Tval)
    return np.einsum("ca,cab->b", ginv, nabla)


# --- fast pointwise connection data --------------------------------------------


@dataclass
class ConnectionData:
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    schouten: np.ndarray
    schouten_trace: float


def point_connection(metric: MetricField, point) -> ConnectionData:
    """Values of (g, g⁻¹, Γ, P, J) at a point, assembled with numpy.

    This is the hot path for parallel transport and hypersurface quadrature;
    it uses Christoffel jets of order 1 and closes the curvature with array
    contractions instead of jet products.
    """
    pt = tuple(float(x) for x in point)
    d = metric.dim
    gamma_j = christoffel_jets(metric, pt, 1)
    gamma = np.empty((d, d, d))
    dgamma = np.empty((d, d, d, d))  # ∂_k Γ^a_{bc} at [k,a,b,c]
    for a in range(d):
        for b in range(d):
            for c in range(d):
                jv = gamma_j[a][b][c]
                gamma[a, b, c] = jv.value
                for k in range(d):
                    dgamma[k, a, b, c] = jv.derivative(k).value
    # dgamma[k,a,b,c] = ∂_k Γ^a_{bc}
    ric = (
        np.einsum("aaeb->be", dgamma)
        - np.einsum("eaab->be", dgamma)
        + np.einsum("aaf,feb->be", gamma, gamma)
        - np.einsum("aef,fab->be", gamma, gamma)
    )
    g = metric.values(pt)
    det = np.linalg.det(g)
    if not np.isfinite(det) or abs(det) < 1e-14:
        raise SingularMetric(f"metric is singular at {pt}")
    ginv = np.linalg.inv(g)
    sc = float(np.einsum("ab,ab->", ginv, ric))
    J = sc / (2.0 * (d - 1))
    P = (ric - J * g) / (d - 2) if d >= 3 else np.zeros((d, d))
    return ConnectionData(g=g, ginv=ginv, gamma=gamma, schouten=P, schouten_trace=J)
