"""Extrinsic and intrinsic geometry of parametrized hypersurfaces.

Conventions:
  * the unit conormal n̂ points toward the side where the attached defining
    density is positive (falling back to a fixed orientation of the
    parametrization when no density is attached);
  * the second fundamental form is the tangential part of ∇n̂, so the round
    sphere of radius R in flat space with outward conormal has H = +1/R;
  * H = tr II/(d−1) and II̊ = II − H g_Σ.

Quadrature uses the trapezoidal rule on periodic parameters (spectrally
accurate for smooth periodic integrands) and Gauss–Legendre nodes on
bounded ones, with the induced area element included, and doubles the grid
until two consecutive values agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .conformal import Density
from .errors import (
    DegenerateJacobian,
    DegenerateNormal,
    DimensionTooLow,
    GridTooCoarse,
    MissingEulerCharacteristic,
    WrongDimension,
)
from .fields import Chart, ScalarField
from .geometry import (
    MetricField,
    curvature,
    point_connection,
    schouten_jets,
)
from .jets import Jet, substitute

__all__ = [
    "Embedding",
    "FundamentalForms",
    "fundamental_forms",
    "induced_metric_field",
    "pullback",
    "gauss_curvature",
    "fialkow",
    "integrate",
    "energies",
]


@dataclass
class Embedding:
    """Hypersurface given by chart expressions of d−1 parameters."""

    param_chart: Chart
    maps: tuple[ScalarField, ...]
    metric: MetricField  # ambient
    defining_density: Density | None = None
    euler_characteristic: int | None = None
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    sample_param: tuple[float, ...] | None = None
    name: str = "surface"

    def __post_init__(self):
        if len(self.maps) != self.metric.dim:
            raise WrongDimension("need one map component per ambient coordinate")
        if self.param_chart.dim != self.metric.dim - 1:
            raise WrongDimension("the parameter chart must have dimension d−1")
        for m in self.maps:
            if m.chart != self.param_chart:
                raise WrongDimension("map components must live on the parameter chart")
        if self.sample_param is None:
            self.sample_param = tuple(
                math.pi if self.param_chart.period(n) else 0.5 * sum(self._range(n))
                for n in self.param_chart.names
            )
        self._cache: dict = {}

    def _range(self, name: str) -> tuple[float, float]:
        if name in self.bounds:
            return self.bounds[name]
        period = self.param_chart.period(name)
        if period:
            return (0.0, period)
        raise GridTooCoarse(
            f"parameter {name!r} has neither a period nor explicit bounds"
        )

    @property
    def ambient_dim(self) -> int:
        return self.metric.dim

    def position(self, u) -> tuple[float, ...]:
        u = tuple(float(x) for x in u)
        return tuple(m.value(u) for m in self.maps)

    def map_jets(self, u, order: int) -> list[Jet]:
        u = tuple(float(x) for x in u)
        return [m.jet(u, order) for m in self.maps]


@dataclass
class FundamentalForms:
    param: tuple[float, ...]
    position: tuple[float, ...]
    jacobian: np.ndarray  # J[i, α] = ∂x^i/∂u^α
    induced: np.ndarray  # g_Σ
    induced_inv: np.ndarray
    conormal: np.ndarray  # covector n̂_i, unit in the ambient metric
    second_form: np.ndarray  # II
    mean_curvature: float  # H
    second_form_tf: np.ndarray  # II̊
    area_element: float  # sqrt(det g_Σ)


def _unit_conormal(emb: Embedding, x0, jac: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    d = emb.ambient_dim
    u_svd, s, _ = np.linalg.svd(jac, full_matrices=True)
    if s[-1] < 1e-10:
        raise DegenerateJacobian(
            f"embedding Jacobian drops rank at parameter {emb.param_chart.names}"
        )
    n = u_svd[:, d - 1]
    norm2 = float(n @ ginv @ n)
    if norm2 <= 0.0:
        raise DegenerateNormal("conormal has nonpositive length")
    n = n / math.sqrt(norm2)
    sigma = emb.defining_density
    if sigma is not None:
        grad = np.array(
            [sigma.rep.jet(x0, 1).derivative(a).value for a in range(d)]
        )
        s_dir = float(n @ ginv @ grad)
        if abs(s_dir) < 1e-10:
            raise DegenerateNormal(
                "defining density gradient is tangent to the surface"
            )
        if s_dir < 0:
            n = -n
    else:
        # fixed fallback: positive determinant of (tangent frame, raised conormal)
        frame = np.column_stack([jac, ginv @ n])
        if np.linalg.det(frame) < 0:
            n = -n
    return n


def fundamental_forms(emb: Embedding, u) -> FundamentalForms:
    u = tuple(float(x) for x in u)
    d = emb.ambient_dim
    k = d - 1
    mj = emb.map_jets(u, 2)
    x0 = tuple(j.value for j in mj)
    jac = np.array(
        [[mj[i].derivative(a).value for a in range(k)] for i in range(d)]
    )
    conn = point_connection(emb.metric, x0)
    g_sigma = jac.T @ conn.g @ jac
    det = np.linalg.det(g_sigma)
    if not np.isfinite(det) or det <= 1e-14:
        raise DegenerateJacobian(f"induced metric degenerate at parameter {u}")
    g_sigma_inv = np.linalg.inv(g_sigma)
    n = _unit_conormal(emb, x0, jac, conn.ginv)

    # second derivatives of the map
    ddx = np.empty((d, k, k))
    for i in range(d):
        for a in range(k):
            for b in range(a, k):
                mi = tuple(
                    (2 if c == a == b else (1 if c in (a, b) else 0)) for c in range(k)
                )
                ddx[i, a, b] = ddx[i, b, a] = mj[i].partial(mi)
    # II_ab = −n_i (∂a∂b x^i + Γ^i_{jk} ∂a x^j ∂b x^k): tangential part of ∇n̂
    second = -np.einsum("i,iab->ab", n, ddx) - np.einsum(
        "i,ijk,ja,kb->ab", n, conn.gamma, jac, jac
    )
    H = float(np.einsum("ab,ab->", g_sigma_inv, second)) / (d - 1)
    second_tf = second - H * g_sigma
    return FundamentalForms(
        param=u,
        position=x0,
        jacobian=jac,
        induced=g_sigma,
        induced_inv=g_sigma_inv,
        conormal=n,
        second_form=second,
        mean_curvature=H,
        second_form_tf=second_tf,
        area_element=math.sqrt(det),
    )


# --- induced fields -------------------------------------------------------------


def _composed_ambient_jets(emb: Embedding, u, order: int):
    """Map jets plus ambient metric jets composed onto the parameter chart."""
    key = ("composed", u, order)
    cached = emb._cache.get(key)
    if cached is None:
        d = emb.ambient_dim
        mj = emb.map_jets(u, order + 1)
        x0 = tuple(j.value for j in mj)
        trunc = [j.truncate(order) for j in mj]
        gj = emb.metric.jets(x0, order)
        composed = [[None] * d for _ in range(d)]
        for i in range(d):
            for j in range(i, d):
                comp = substitute(gj[i][j], trunc)
                composed[i][j] = comp
                composed[j][i] = comp
        cached = (mj, composed)
        emb._cache[key] = cached
    return cached


def induced_metric_field(emb: Embedding) -> MetricField:
    """The induced metric as a metric field on the parameter chart."""
    cached = emb._cache.get("induced_field")
    if cached is not None:
        return cached
    k = emb.param_chart.dim
    d = emb.ambient_dim

    def component(alpha: int, beta: int) -> ScalarField:
        def fn(u, order):
            mj, composed = _composed_ambient_jets(emb, u, order)
            acc = None
            for i in range(d):
                dia = mj[i].derivative(alpha)
                for j in range(d):
                    djb = mj[j].derivative(beta)
                    term = composed[i][j] * dia * djb
                    acc = term if acc is None else acc + term
            return acc

        return ScalarField(emb.param_chart, fn)

    comps = [[None] * k for _ in range(k)]
    for a in range(k):
        for b in range(a, k):
            f = component(a, b)
            comps[a][b] = f
            comps[b][a] = f
    cached = MetricField(emb.param_chart, comps)
    emb._cache["induced_field"] = cached
    return cached


def pullback(emb: Embedding, ambient_field: ScalarField) -> ScalarField:
    """Restrict an ambient scalar field to the surface parameters."""

    def fn(u, order):
        mj = emb.map_jets(u, order)
        x0 = tuple(j.value for j in mj)
        return substitute(ambient_field.jet(x0, order), mj)

    return ScalarField(emb.param_chart, fn)


def gauss_curvature(emb: Embedding, u) -> float:
    """Intrinsic Gauss curvature of the induced metric (surfaces only)."""
    if emb.param_chart.dim != 2:
        raise WrongDimension("Gauss curvature needs a 2-dimensional surface")
    induced = induced_metric_field(emb)
    u = tuple(float(x) for x in u)
    from .geometry import riemann_jets, inverse_metric_jets

    # K = R_1212 / det(g) for 2-dimensional metrics
    R = riemann_jets(induced, u, 0)
    g = induced.values(u)
    return R[0][1][0][1].value / float(np.linalg.det(g))


def fialkow(emb: Embedding, u) -> np.ndarray:
    """Extrinsic-intrinsic curvature discrepancy tensor on the surface.

    F = P^⊤ − P^Σ + H II̊ + ½ H² g_Σ, defined for ambient dimension ≥ 4.
    """
    d = emb.ambient_dim
    if d < 4:
        raise DimensionTooLow("this tensor needs ambient dimension at least 4")
    u = tuple(float(x) for x in u)
    forms = fundamental_forms(emb, u)
    P_amb = point_connection(emb.metric, forms.position).schouten
    P_top = forms.jacobian.T @ P_amb @ forms.jacobian
    induced = induced_metric_field(emb)
    P_sigma = np.array(
        [
            [pj.value for pj in row]
            for row in schouten_jets(induced, u, 0).P
        ]
    )
    H = forms.mean_curvature
    return P_top - P_sigma + H * forms.second_form_tf + 0.5 * H * H * forms.induced


# --- quadrature ------------------------------------------------------------------


def _axis_rule(emb: Embedding, name: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    period = emb.param_chart.period(name)
    if period and name not in emb.bounds:
        nodes = np.arange(n) * (period / n)
        weights = np.full(n, period / n)
        return nodes, weights
    lo, hi = emb._range(name)
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes, weights


def _grid(emb: Embedding, sizes: Sequence[int]):
    rules = [
        _axis_rule(emb, name, n) for name, n in zip(emb.param_chart.names, sizes)
    ]
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)
    return points, weights


def _default_sizes(emb: Embedding) -> list[int]:
    sizes = []
    for name in emb.param_chart.names:
        period = emb.param_chart.period(name)
        sizes.append(32 if (period and name not in emb.bounds) else 24)
    if emb.param_chart.dim >= 3:
        sizes = [max(8, s // 2) for s in sizes]
    return sizes


def _integrate_vector(
    emb: Embedding,
    node_fn: Callable[[tuple[float, ...]], np.ndarray],
    n_out: int,
    tol: float,
    base: Sequence[int] | None,
    refine: bool,
    max_doublings: int = 3,
) -> np.ndarray:
    sizes = list(base) if base is not None else _default_sizes(emb)

    def run(szs) -> np.ndarray:
        points, weights = _grid(emb, szs)
        vals = np.empty((len(points), n_out))
        for idx, u in enumerate(points):
            vals[idx] = node_fn(tuple(u))
        return weights @ vals

    prev = run(sizes)
    if not refine:
        return prev
    for _ in range(max_doublings):
        sizes = [2 * s for s in sizes]
        cur = run(sizes)
        if np.abs(cur - prev).max() <= tol * max(1.0, np.abs(cur).max()):
            return cur
        prev = cur
    raise GridTooCoarse(
        f"quadrature did not converge to {tol:g} within {max_doublings} doublings"
    )


def integrate(
    emb: Embedding,
    integrand: Callable[[tuple[float, ...]], float],
    tol: float = 1e-6,
    base: Sequence[int] | None = None,
    refine: bool = True,
) -> float:
    """Integrate a parameter-space function against the induced area element."""

    def node(u):
        forms = fundamental_forms(emb, u)
        return np.array([integrand(u) * forms.area_element])

    return float(_integrate_vector(emb, node, 1, tol, base, refine)[0])


# --- energy functionals ------------------------------------------------------------


_ALL_ENERGIES = ("area", "bending", "willmore_flat", "gauss_bonnet", "q3", "q4")


def _resolve_euler(emb: Embedding, gb_value: float | None, use_gauss_bonnet: bool) -> int:
    if emb.euler_characteristic is not None:
        return emb.euler_characteristic
    if gb_value is not None and use_gauss_bonnet:
        return round(gb_value / (2.0 * math.pi))
    raise MissingEulerCharacteristic(
        f"embedding {emb.name!r} has no Euler characteristic attached"
    )


def energies(
    emb: Embedding,
    which: Sequence[str] | None = None,
    tol: float = 1e-6,
    base: Sequence[int] | None = None,
    refine: bool = True,
    use_gauss_bonnet: bool = True,
) -> dict[str, float]:
    """Quadrature energy functionals appropriate to the dimension.

    area: induced volume; bending: ¼∫ tr(II̊²); willmore_flat: ∫(H²−K) for
    surfaces in flat 3-space with K the intrinsic Gauss curvature;
    gauss_bonnet: ∫K (equals 2πχ); q3: πχ − bending (surfaces in curved or
    flat 3-space); q4: (2/3)∫ tr(II̊∘F) for hypersurfaces in 4-space.
    """
    d = emb.ambient_dim
    surface = emb.param_chart.dim == 2
    if which is None:
        which = ["area", "bending"]
        if surface:
            which += ["gauss_bonnet", "q3"]
            if d == 3 and emb.metric.flat:
                which.append("willmore_flat")
        if d == 4:
            which.append("q4")
    which = list(which)
    for name in which:
        if name not in _ALL_ENERGIES:
            raise WrongDimension(f"unknown energy {name!r}")
    if "willmore_flat" in which and not (surface and d == 3 and emb.metric.flat):
        raise WrongDimension(
            "the flat Willmore energy needs a surface in flat 3-space"
        )
    if ("gauss_bonnet" in which or "q3" in which) and not surface:
        raise WrongDimension("Gauss curvature integrals need a 2-surface")
    if "q4" in which and d != 4:
        raise WrongDimension("the 4-dimensional energy needs ambient dimension 4")

    needs_K = "willmore_flat" in which or "gauss_bonnet" in which or "q3" in which
    needs_F = "q4" in which
    integral_names = [n for n in which if n != "q3"]
    if "q3" in which and "bending" not in integral_names:
        integral_names.append("bending")
    if "q3" in which and use_gauss_bonnet and emb.euler_characteristic is None:
        if "gauss_bonnet" not in integral_names:
            integral_names.append("gauss_bonnet")

    def node(u) -> np.ndarray:
        forms = fundamental_forms(emb, u)
        K = gauss_curvature(emb, u) if needs_K else 0.0
        Fmat = fialkow(emb, u) if needs_F else None
        gi = forms.induced_inv
        out = np.empty(len(integral_names))
        for i, name in enumerate(integral_names):
            if name == "area":
                v = 1.0
            elif name == "bending":
                v = 0.25 * float(
                    np.einsum("ac,bd,ab,cd->", gi, gi, forms.second_form_tf, forms.second_form_tf)
                )
            elif name == "willmore_flat":
                v = forms.mean_curvature**2 - K
            elif name == "gauss_bonnet":
                v = K
            else:  # q4
                v = (2.0 / 3.0) * float(
                    np.einsum("ac,bd,ab,cd->", gi, gi, forms.second_form_tf, Fmat)
                )
            out[i] = v * forms.area_element
        return out

    values = _integrate_vector(emb, node, len(integral_names), tol, base, refine)
    result = dict(zip(integral_names, values))
    if "q3" in which:
        gb = result.get("gauss_bonnet")
        chi = _resolve_euler(emb, gb, use_gauss_bonnet)
        result["q3"] = math.pi * chi - result["bending"]
    return {k: float(v) for k, v in result.items() if k in which}
