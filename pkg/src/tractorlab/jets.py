"""Truncated multivariate Taylor-polynomial (jet) arithmetic.

A ``Jet`` holds the Taylor coefficients (mixed partial divided by the
multi-index factorial) of a smooth function at a point, truncated at a fixed
total degree.  Evaluating an expression on seeded coordinate jets therefore
yields every mixed partial derivative up to that degree, exactly to the
truncation order; there is no step-size error anywhere in this package.

Conventions:
  * coefficients are stored densely, ordered by total degree and then
    lexicographically (largest first exponent first) within a degree;
  * multiplication is plain truncated convolution, which is why the
    derivative/factorial normalization is used;
  * the degree-0 coefficient is the point value;
  * shapes are rigid: combining jets with different (nvars, order) raises
    ``ShapeMismatch``.  Scalars lift to constant jets automatically.

Analytic primitives (division, sin, cos, exp, log, sqrt, atan, powers) are
computed by composing the univariate Taylor series of the primitive at the
jet's value with the jet's nonconstant part, so they are exact to the
truncation order as well.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, OrderExceeded, ShapeMismatch

__all__ = [
    "Jet",
    "JetShape",
    "jet_shape",
    "partial_derivative",
    "substitute",
    "add",
    "sub",
    "mul",
    "div",
    "pow_",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "atan",
]


def _graded_indices(nvars: int, order: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []

    def fill(prefix: tuple[int, ...], remaining: int, slots: int) -> None:
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for first in range(remaining, -1, -1):
            fill(prefix + (first,), remaining - first, slots - 1)

    for total in range(order + 1):
        fill((), total, nvars)
    return out


class JetShape:
    """Index bookkeeping shared by all jets of one (nvars, order)."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError("nvars must be at least 1")
        if order < 0:
            raise ValueError("order must be nonnegative")
        self.nvars = nvars
        self.order = order
        self.indices = tuple(_graded_indices(nvars, order))
        self.position = {mi: p for p, mi in enumerate(self.indices)}
        self.size = len(self.indices)
        self.degrees = np.array([sum(mi) for mi in self.indices], dtype=np.int64)
        # degree-d coefficients occupy a contiguous prefix-extending block
        self._degree_end = np.searchsorted(self.degrees, np.arange(order + 2))
        self._mul_table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._deriv_maps: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def truncation_size(self, order: int) -> int:
        return int(self._degree_end[order + 1])

    @property
    def mul_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._mul_table is None:
            ii: list[int] = []
            jj: list[int] = []
            kk: list[int] = []
            pos = self.position
            for p, a in enumerate(self.indices):
                da = sum(a)
                limit = self.truncation_size(self.order - da)
                for q in range(limit):
                    b = self.indices[q]
                    ii.append(p)
                    jj.append(q)
                    kk.append(pos[tuple(x + y for x, y in zip(a, b))])
            self._mul_table = (
                np.array(ii, dtype=np.intp),
                np.array(jj, dtype=np.intp),
                np.array(kk, dtype=np.intp),
            )
        return self._mul_table

    def deriv_map(self, var: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        maps = self._deriv_maps.get(var)
        if maps is None:
            if self.order == 0:
                raise OrderExceeded("cannot differentiate an order-0 jet")
            lower = jet_shape(self.nvars, self.order - 1)
            dst, src, fac = [], [], []
            for p, beta in enumerate(lower.indices):
                alpha = tuple(
                    b + 1 if i == var else b for i, b in enumerate(beta)
                )
                dst.append(p)
                src.append(self.position[alpha])
                fac.append(beta[var] + 1)
            maps = (
                np.array(dst, dtype=np.intp),
                np.array(src, dtype=np.intp),
                np.array(fac, dtype=np.float64),
            )
            self._deriv_maps[var] = maps
        return maps

    def __repr__(self) -> str:  # pragma: no cover
        return f"JetShape(nvars={self.nvars}, order={self.order})"


_SHAPES: dict[tuple[int, int], JetShape] = {}


def jet_shape(nvars: int, order: int) -> JetShape:
    key = (nvars, order)
    shape = _SHAPES.get(key)
    if shape is None:
        shape = _SHAPES[key] = JetShape(nvars, order)
    return shape


class Jet:
    """Immutable truncated Taylor expansion at a point."""

    __slots__ = ("shape", "coeffs")

    def __init__(self, shape: JetShape, coeffs: np.ndarray, copy: bool = True):
        if len(coeffs) != shape.size:
            raise ShapeMismatch(
                f"coefficient vector of length {len(coeffs)} does not match "
                f"shape of size {shape.size}"
            )
        self.shape = shape
        arr = np.asarray(coeffs, dtype=np.float64)
        self.coeffs = arr.copy() if copy else arr
        self.coeffs.setflags(write=False)

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, nvars: int, order: int, value: float) -> "Jet":
        shape = jet_shape(nvars, order)
        coeffs = np.zeros(shape.size)
        coeffs[0] = value
        return cls(shape, coeffs, copy=False)

    @classmethod
    def variable(cls, nvars: int, order: int, index: int, value: float) -> "Jet":
        """Coordinate seed: value plus a unit first-order term in slot ``index``."""
        shape = jet_shape(nvars, order)
        coeffs = np.zeros(shape.size)
        coeffs[0] = value
        if order >= 1:
            seed = tuple(1 if i == index else 0 for i in range(nvars))
            coeffs[shape.position[seed]] = 1.0
        return cls(shape, coeffs, copy=False)

    @classmethod
    def from_coeffs(cls, nvars: int, order: int, entries) -> "Jet":
        """Build from a mapping multi-index -> Taylor coefficient."""
        shape = jet_shape(nvars, order)
        coeffs = np.zeros(shape.size)
        for mi, c in dict(entries).items():
            mi = tuple(int(m) for m in mi)
            if len(mi) != nvars or sum(mi) > order:
                raise ShapeMismatch(f"multi-index {mi} does not fit the shape")
            coeffs[shape.position[mi]] = float(c)
        return cls(shape, coeffs, copy=False)

    # -- basic accessors -----------------------------------------------------

    @property
    def nvars(self) -> int:
        return self.shape.nvars

    @property
    def order(self) -> int:
        return self.shape.order

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, multi_index: Sequence[int]) -> float:
        mi = tuple(int(m) for m in multi_index)
        pos = self.shape.position.get(mi)
        if pos is None:
            raise OrderExceeded(f"multi-index {mi} exceeds order {self.order}")
        return float(self.coeffs[pos])

    def partial(self, multi_index: Sequence[int]) -> float:
        """Mixed partial-derivative value: coefficient times the factorial."""
        mi = tuple(int(m) for m in multi_index)
        if len(mi) != self.nvars:
            raise ShapeMismatch("multi-index length does not match nvars")
        if sum(mi) > self.order:
            raise OrderExceeded(f"multi-index {mi} exceeds order {self.order}")
        fac = 1.0
        for m in mi:
            fac *= math.factorial(m)
        return float(self.coeffs[self.shape.position[mi]]) * fac

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExceeded("cannot raise the order of a jet")
        if order == self.order:
            return self
        shape = jet_shape(self.nvars, order)
        return Jet(shape, self.coeffs[: shape.size])

    def derivative(self, var: int) -> "Jet":
        """Partial derivative jet, one order lower."""
        if not 0 <= var < self.nvars:
            raise ShapeMismatch(f"variable index {var} out of range")
        dst, src, fac = self.shape.deriv_map(var)
        lower = jet_shape(self.nvars, self.order - 1)
        coeffs = np.zeros(lower.size)
        coeffs[dst] = self.coeffs[src] * fac
        return Jet(lower, coeffs, copy=False)

    def allclose(self, other: "Jet", tol: float = 1e-12) -> bool:
        other = self._lift(other)
        scale = max(1.0, np.abs(self.coeffs).max(), np.abs(other.coeffs).max())
        return bool(np.abs(self.coeffs - other.coeffs).max() <= tol * scale)

    # -- arithmetic ----------------------------------------------------------

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.shape is not self.shape:
                if (other.nvars, other.order) != (self.nvars, self.order):
                    raise ShapeMismatch(
                        f"cannot combine jets of shape "
                        f"({other.nvars},{other.order}) and "
                        f"({self.nvars},{self.order})"
                    )
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet.constant(self.nvars, self.order, float(other))
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.shape, self.coeffs + other.coeffs, copy=False)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.shape, self.coeffs - other.coeffs, copy=False)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.shape, other.coeffs - self.coeffs, copy=False)

    def __neg__(self):
        return Jet(self.shape, -self.coeffs, copy=False)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.shape, self.coeffs * float(other), copy=False)
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        ii, jj, kk = self.shape.mul_table
        products = self.coeffs[ii] * other.coeffs[jj]
        coeffs = np.bincount(kk, weights=products, minlength=self.shape.size)
        return Jet(self.shape, coeffs, copy=False)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if float(other) == 0.0:
                raise DomainError("division by zero")
            return Jet(self.shape, self.coeffs / float(other), copy=False)
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self * _reciprocal(other)

    def __rtruediv__(self, other):
        rec = _reciprocal(self)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return rec * float(other)
        return rec * self._lift(other)

    def __pow__(self, exponent):
        return pow_(self, exponent)

    def __repr__(self) -> str:  # pragma: no cover
        head = ", ".join(
            f"{mi}:{c:.6g}"
            for mi, c in zip(self.shape.indices[:6], self.coeffs[:6])
        )
        return f"Jet({self.nvars} vars, order {self.order}; {head}, ...)"


# -- series composition ------------------------------------------------------


def _apply_series(a: Jet, series: Sequence[float]) -> Jet:
    """Compose the univariate Taylor series with the nonconstant part of a."""
    u_coeffs = a.coeffs.copy()
    u_coeffs[0] = 0.0
    u = Jet(a.shape, u_coeffs, copy=False)
    result = Jet.constant(a.nvars, a.order, series[a.order])
    for k in range(a.order - 1, -1, -1):
        result = result * u + series[k]
    return result


def _reciprocal(b: Jet) -> Jet:
    b0 = b.value
    if b0 == 0.0:
        raise DomainError("division by a jet with zero value")
    series = [(-1.0) ** k / b0 ** (k + 1) for k in range(b.order + 1)]
    return _apply_series(b, series)


def _int_power(a: Jet, n: int) -> Jet:
    if n == 0:
        return Jet.constant(a.nvars, a.order, 1.0)
    if n < 0:
        return _int_power(_reciprocal(a), -n)
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result  # type: ignore[return-value]


# -- public operations (accept jets or plain numbers) -------------------------


def _is_number(x) -> bool:
    return isinstance(x, (int, float, np.floating, np.integer))


def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def div(a, b):
    if _is_number(a) and _is_number(b):
        if float(b) == 0.0:
            raise DomainError("division by zero")
        return float(a) / float(b)
    if _is_number(a) and isinstance(b, Jet):
        return b.__rtruediv__(a)
    return a / b


def pow_(a, b):
    """General power; integer exponents work for any base value."""
    if isinstance(b, Jet):
        nonconst = b.coeffs[1:]
        if nonconst.size == 0 or np.abs(nonconst).max() == 0.0:
            b = b.value
        else:
            return exp(b * log(a))
    if _is_number(b):
        bf = float(b)
        if bf == int(bf):
            if _is_number(a):
                if float(a) == 0.0 and bf < 0:
                    raise DomainError("zero raised to a negative power")
                return float(a) ** int(bf)
            return _int_power(a, int(bf))
        if _is_number(a):
            if float(a) <= 0.0:
                raise DomainError("fractional power of a nonpositive value")
            return float(a) ** bf
        return exp(log(a) * bf)
    raise TypeError(f"unsupported exponent type {type(b)!r}")


def sin(a):
    if _is_number(a):
        return math.sin(float(a))
    a0 = a.value
    s, c = math.sin(a0), math.cos(a0)
    cycle = (s, c, -s, -c)
    series = [cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)]
    return _apply_series(a, series)


def cos(a):
    if _is_number(a):
        return math.cos(float(a))
    a0 = a.value
    s, c = math.sin(a0), math.cos(a0)
    cycle = (c, -s, -c, s)
    series = [cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)]
    return _apply_series(a, series)


def exp(a):
    if _is_number(a):
        return math.exp(float(a))
    e0 = math.exp(a.value)
    series = [e0 / math.factorial(k) for k in range(a.order + 1)]
    return _apply_series(a, series)


def log(a):
    if _is_number(a):
        if float(a) <= 0.0:
            raise DomainError("log of a nonpositive value")
        return math.log(float(a))
    a0 = a.value
    if a0 <= 0.0:
        raise DomainError("log of a jet with nonpositive value")
    series = [math.log(a0)]
    for k in range(1, a.order + 1):
        series.append((-1.0) ** (k + 1) / (k * a0**k))
    return _apply_series(a, series)


def sqrt(a):
    if _is_number(a):
        if float(a) <= 0.0:
            raise DomainError("sqrt of a nonpositive value")
        return math.sqrt(float(a))
    a0 = a.value
    if a0 <= 0.0:
        raise DomainError("sqrt of a jet with nonpositive value")
    series = [math.sqrt(a0)]
    # binomial series: c_k = c_{k-1} * (1/2 - (k-1)) / (k * a0)
    for k in range(1, a.order + 1):
        series.append(series[-1] * (0.5 - (k - 1)) / (k * a0))
    return _apply_series(a, series)


def atan(a):
    if _is_number(a):
        return math.atan(float(a))
    a0 = a.value
    # integrate the series of 1/(1+t^2) at a0 termwise
    denom0 = 1.0 + a0 * a0
    q = [1.0 / denom0]
    for _ in range(1, a.order + 1):
        prev2 = q[-2] if len(q) >= 2 else 0.0
        q.append(-(2.0 * a0 * q[-1] + prev2) / denom0)
    series = [math.atan(a0)] + [q[k - 1] / k for k in range(1, a.order + 1)]
    return _apply_series(a, series)


def partial_derivative(j: Jet, multi_index: Sequence[int]) -> float:
    """Mixed partial of the represented function at the base point."""
    return j.partial(multi_index)


def substitute(outer: Jet, inners: Sequence[Jet]) -> Jet:
    """Compose ``outer`` with inner jets (Taylor substitution).

    ``outer`` must be expanded at the point whose coordinates are the inner
    values; the result is exact to the inner order provided the outer order
    is at least the inner order.
    """
    if len(inners) != outer.nvars:
        raise ShapeMismatch("need one inner jet per outer variable")
    shape = inners[0].shape
    for j in inners:
        if j.shape is not shape and (j.nvars, j.order) != (shape.nvars, shape.order):
            raise ShapeMismatch("inner jets must share one shape")
    order = shape.order
    deltas = []
    for j in inners:
        coeffs = j.coeffs.copy()
        coeffs[0] = 0.0
        deltas.append(Jet(j.shape, coeffs, copy=False))
    # powers of each delta up to the outer degree actually used
    max_deg = min(outer.order, order)
    powers: list[list[Jet]] = []
    one = Jet.constant(shape.nvars, order, 1.0)
    for dlt in deltas:
        ps = [one]
        for _ in range(max_deg):
            ps.append(ps[-1] * dlt)
        powers.append(ps)
    result = Jet.constant(shape.nvars, order, 0.0)
    for mi, c in zip(outer.shape.indices, outer.coeffs):
        if c == 0.0 or sum(mi) > max_deg:
            continue
        term = None
        for var, m in enumerate(mi):
            if m == 0:
                continue
            term = powers[var][m] if term is None else term * powers[var][m]
        if term is None:
            result = result + c
        else:
            result = result + term * c
    return result
