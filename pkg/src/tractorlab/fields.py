"""Charts and scalar fields evaluable to jets of any order.

A ``ScalarField`` is a pure function of a chart point that can produce its
own jet truncated at any requested order.  Derived fields (sums, products,
partial derivatives, analytic images) are closures that request whatever
order they need from their ingredients, so second derivatives of a field
built from second derivatives of another one come out exact.  Every field
memoizes its jets per (point, order); iterated constructions such as the
singular Yamabe expansion rely on this to stay close to linear cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import expr as exprmod
from . import jets
from .jets import Jet

__all__ = [
    "Chart",
    "ScalarField",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "atan",
]


@dataclass(frozen=True)
class Chart:
    """Coordinate chart: names, optional periodicities, optional domain.

    ``periodic`` maps a coordinate name to its period.  ``domain`` is an
    optional expression AST understood as "domain = where this is positive".
    """

    names: tuple[str, ...]
    periodic: tuple[tuple[str, float], ...] = ()
    domain: object | None = None

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("chart coordinate names must be unique")
        for name, _ in self.periodic:
            if name not in self.names:
                raise ValueError(f"periodic coordinate {name!r} not in chart")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def period(self, name: str) -> float | None:
        for n, p in self.periodic:
            if n == name:
                return p
        return None

    def contains(self, point: Sequence[float]) -> bool:
        if self.domain is None:
            return True
        env = dict(zip(self.names, point))
        return exprmod.eval_value(self.domain, env) > 0.0


class ScalarField:
    """A chart function with exact jets at every point.

    ``fn(point, order) -> Jet`` is the only contract; everything else is
    sugar.  Fields are immutable and safe to share.
    """

    __slots__ = ("chart", "_fn", "_cache", "constant_value")

    def __init__(
        self,
        chart: Chart,
        fn: Callable[[tuple[float, ...], int], Jet],
        constant_value: float | None = None,
    ):
        self.chart = chart
        self._fn = fn
        self._cache: dict[tuple[tuple[float, ...], int], Jet] = {}
        self.constant_value = constant_value

    # -- evaluation -----------------------------------------------------------

    def jet(self, point: Sequence[float], order: int) -> Jet:
        pt = tuple(float(x) for x in point)
        if len(pt) != self.chart.dim:
            raise ValueError(
                f"point of length {len(pt)} on a {self.chart.dim}-dimensional chart"
            )
        key = (pt, order)
        cached = self._cache.get(key)
        if cached is None:
            cached = self._fn(pt, order)
            self._cache[key] = cached
        return cached

    def value(self, point: Sequence[float]) -> float:
        return self.jet(point, 0).value

    # -- constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, chart: Chart, value: float) -> "ScalarField":
        value = float(value)
        return cls(
            chart,
            lambda p, n: Jet.constant(chart.dim, n, value),
            constant_value=value,
        )

    @classmethod
    def coordinate(cls, chart: Chart, index: int) -> "ScalarField":
        return cls(
            chart, lambda p, n: Jet.variable(chart.dim, n, index, p[index])
        )

    @classmethod
    def from_expr(
        cls,
        chart: Chart,
        text_or_ast,
        params: Mapping[str, float] | None = None,
    ) -> "ScalarField":
        ast = exprmod.parse(text_or_ast) if isinstance(text_or_ast, str) else text_or_ast
        params = dict(params or {})

        def fn(p: tuple[float, ...], n: int) -> Jet:
            return exprmod.eval_jet(ast, zip(chart.names, p), n, params)

        if isinstance(ast, exprmod.Lit):
            return cls.constant(chart, ast.value)
        return cls(chart, fn)

    @classmethod
    def from_callable(cls, chart: Chart, fn) -> "ScalarField":
        return cls(chart, fn)

    # -- combinators ----------------------------------------------------------

    def _as_field(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            if other.chart != self.chart:
                raise ValueError("fields live on different charts")
            return other
        return ScalarField.constant(self.chart, float(other))

    def __add__(self, other):
        other = self._as_field(other)
        return ScalarField(
            self.chart, lambda p, n: self.jet(p, n) + other.jet(p, n)
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = self._as_field(other)
        return ScalarField(
            self.chart, lambda p, n: self.jet(p, n) - other.jet(p, n)
        )

    def __rsub__(self, other):
        other = self._as_field(other)
        return ScalarField(
            self.chart, lambda p, n: other.jet(p, n) - self.jet(p, n)
        )

    def __mul__(self, other):
        other = self._as_field(other)
        return ScalarField(
            self.chart, lambda p, n: self.jet(p, n) * other.jet(p, n)
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._as_field(other)
        return ScalarField(
            self.chart, lambda p, n: self.jet(p, n) / other.jet(p, n)
        )

    def __rtruediv__(self, other):
        other = self._as_field(other)
        return ScalarField(
            self.chart, lambda p, n: other.jet(p, n) / self.jet(p, n)
        )

    def __neg__(self):
        return ScalarField(self.chart, lambda p, n: -self.jet(p, n))

    def __pow__(self, exponent):
        if isinstance(exponent, ScalarField):
            other = exponent
            return ScalarField(
                self.chart, lambda p, n: jets.pow_(self.jet(p, n), other.jet(p, n))
            )
        return ScalarField(
            self.chart, lambda p, n: jets.pow_(self.jet(p, n), exponent)
        )

    def partial(self, index: int) -> "ScalarField":
        """Coordinate partial derivative as a field (one extra jet order)."""
        return ScalarField(
            self.chart, lambda p, n: self.jet(p, n + 1).derivative(index)
        )

    def mapped(self, jet_fn) -> "ScalarField":
        """Apply an analytic jet primitive pointwise."""
        return ScalarField(self.chart, lambda p, n: jet_fn(self.jet(p, n)))


def _lift_unary(jet_fn):
    def apply(x):
        if isinstance(x, ScalarField):
            return x.mapped(jet_fn)
        return jet_fn(x)

    return apply


sin = _lift_unary(jets.sin)
cos = _lift_unary(jets.cos)
exp = _lift_unary(jets.exp)
log = _lift_unary(jets.log)
sqrt = _lift_unary(jets.sqrt)
atan = _lift_unary(jets.atan)
