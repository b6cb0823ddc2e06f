"""Nested first-order jets and left-invariant directional derivatives.

A :class:`Jet` of depth ``d`` is a truncated polynomial in ``d``
independent perturbation slots ``e_1 .. e_d`` with ``e_k**2 = 0``.  Its
coefficients live on a trailing axis of length ``2**d`` indexed by the
bitmask of the slots that appear in each monomial.  Evaluating a smooth
function on such a jet yields every mixed partial of order at most one per
slot, which is exactly what iterating ``d/dt f(g (I + t A))`` needs.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .groups import GroupModel, get_model

MAX_DEPTH = 3


class DepthError(ValueError):
    """Raised when a derivative would nest deeper than :data:`MAX_DEPTH`."""


@lru_cache(maxsize=None)
def _mult_tables(depth):
    n = 1 << depth
    ia, ib, io = [], [], []
    for s in range(n):
        for t in range(n):
            if s & t == 0:
                ia.append(s)
                ib.append(t)
                io.append(s | t)
    scatter = np.zeros((len(io), n))
    scatter[np.arange(len(io)), io] = 1.0
    return np.array(ia), np.array(ib), scatter


class Jet:
    """Truncated multilinear expansion with broadcasting over leading axes."""

    __array_ufunc__ = None

    def __init__(self, data):
        data = np.asarray(data, dtype=float)
        n = data.shape[-1]
        depth = n.bit_length() - 1
        if n != 1 << depth:
            raise ValueError("jet coefficient axis must have length 2**depth")
        self.data = data
        self.depth = depth

    # -- construction ------------------------------------------------------
    @classmethod
    def constant(cls, value, depth):
        value = np.asarray(value, dtype=float)
        data = np.zeros(value.shape + (1 << depth,))
        data[..., 0] = value
        return cls(data)

    def promote(self, depth):
        if depth == self.depth:
            return self
        if depth < self.depth:
            raise DepthError("cannot lower jet depth")
        data = np.zeros(self.data.shape[:-1] + (1 << depth,))
        data[..., : self.data.shape[-1]] = self.data
        return Jet(data)

    @property
    def value(self):
        return self.data[..., 0]

    @property
    def shape(self):
        return self.data.shape[:-1]

    def coefficient(self, mask):
        return self.data[..., mask]

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.data[key + (slice(None),)])

    def __repr__(self):
        return f"Jet(depth={self.depth}, shape={self.shape})"

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            depth = max(self.depth, other.depth)
            return self.promote(depth), other.promote(depth)
        return self, Jet.constant(other, self.depth)

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.data + b.data)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.data)

    def __pos__(self):
        return self

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.data - b.data)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(b.data - a.data)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.data * other[..., None])
        a, b = self._coerce(other)
        if a.depth == 0:
            return Jet(a.data * b.data)
        ia, ib, scatter = _mult_tables(a.depth)
        return Jet((a.data[..., ia] * b.data[..., ib]) @ scatter)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.data / other[..., None])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(np.ones(self.shape), self.depth)
            base = self
            while p:
                if p & 1:
                    out = out * base
                base = base * base
                p >>= 1
            return out
        return self.apply(lambda x, k: _power_derivative(x, p, k))

    # -- elementary functions -------------------------------------------------
    def apply(self, derivative):
        """Compose with a scalar function given ``derivative(x, k) = f^(k)(x)``.

        Uses the terminating Taylor series in the nilpotent part.
        """
        x0 = self.value
        nil = Jet(self.data.copy())
        nil.data[..., 0] = 0.0
        out = Jet.constant(derivative(x0, 0), self.depth)
        term = Jet.constant(np.ones(self.shape), self.depth)
        for k in range(1, self.depth + 1):
            term = term * nil
            out = out + term * (derivative(x0, k) / math.factorial(k))
        return out

    def reciprocal(self):
        return self.apply(lambda x, k: (-1.0) ** k * math.factorial(k) / x ** (k + 1))

    def exp(self):
        return self.apply(lambda x, k: np.exp(x))

    def log(self):
        return self.apply(
            lambda x, k: np.log(x) if k == 0 else (-1.0) ** (k - 1) * math.factorial(k - 1) / x**k
        )

    def sqrt(self):
        return self.apply(lambda x, k: _power_derivative(x, 0.5, k))

    def sin(self):
        return self.apply(lambda x, k: np.sin(x + k * np.pi / 2))

    def cos(self):
        return self.apply(lambda x, k: np.cos(x + k * np.pi / 2))


def _power_derivative(x, p, k):
    c = 1.0
    for j in range(k):
        c *= p - j
    return c * x ** (p - k)


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Jet) else np.log(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Jet) else np.sqrt(x)


def sin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def value_of(x):
    """Plain value of a jet or array."""
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def extend(g, direction: np.ndarray) -> Jet:
    """Jet-valued matrix ``g (I + e A)`` with a fresh slot ``e``."""
    g = g if isinstance(g, Jet) else Jet.constant(g, 0)
    if g.depth >= MAX_DEPTH:
        raise DepthError(f"jet depth budget of {MAX_DEPTH} exhausted")
    moved = np.einsum("...ijk,jl->...ilk", g.data, direction)
    return Jet(np.concatenate([g.data, moved], axis=-1))


class ScalarField:
    """A smooth function of the ambient coordinates of a model group.

    ``fn`` receives the coordinate list of :meth:`GroupModel.coordinates`
    (arrays or jets) and must only use operations that :class:`Jet`
    supports.  ``nesting`` counts the directional derivatives already
    applied; it may not exceed :data:`MAX_DEPTH`.
    """

    def __init__(self, fn, model, nesting=0, positive=False, name=None):
        self.fn = fn
        self.model = get_model(model)
        self.nesting = nesting
        self.positive = positive
        self.name = name or getattr(fn, "__name__", "field")

    def __call__(self, g):
        if isinstance(g, Jet):
            return self._eval(g)
        g = np.asarray(g, dtype=float)
        out = self._eval(g)
        if isinstance(out, Jet):
            out = out.value
        return np.broadcast_to(np.asarray(out, dtype=float), g.shape[:-2]).copy()

    def _eval(self, g):
        return self.fn(self.model.coordinates(g))

    def __repr__(self):
        return f"ScalarField({self.name}, model={self.model.name}, nesting={self.nesting})"

    # -- pointwise algebra -----------------------------------------------------
    def _combine(self, other, op, label):
        if isinstance(other, ScalarField):
            if other.model != self.model:
                raise ValueError("fields live on different models")
            nesting = max(self.nesting, other.nesting)
            return _Composite(
                lambda g: op(self._eval(g), other._eval(g)), self.model, nesting, label
            )
        return _Composite(lambda g: op(self._eval(g), other), self.model, self.nesting, label)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b, "sub")

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a, "rsub")

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, lambda a, b: a / b, "div")

    def __neg__(self):
        return self * -1.0


class _Composite(ScalarField):
    """Field defined directly on group points instead of coordinates."""

    def __init__(self, point_fn, model, nesting, name):
        super().__init__(point_fn, model, nesting=nesting, name=name)

    def _eval(self, g):
        return self.fn(g)


def field_from_points(point_fn, model, nesting=0, name=None) -> ScalarField:
    """Wrap a function of group points (arrays or jet matrices)."""
    return _Composite(point_fn, get_model(model), nesting, name or "field")


def apply_field(direction, f: ScalarField, model=None) -> ScalarField:
    """The left-invariant derivative ``(A f)(g) = d/dt f(g (I + t A))|_{t=0}``.

    ``direction`` is a coefficient triple on the ``X, Y, Z`` basis.
    """
    model = f.model if model is None else get_model(model)
    if model != f.model:
        raise ValueError("field and model disagree")
    if f.nesting + 1 > MAX_DEPTH:
        raise DepthError(
            f"{f!r} already carries {f.nesting} derivatives; the budget is {MAX_DEPTH}"
        )
    matrix = model.embed(direction)

    def derivative(g):
        jet = extend(g, matrix)
        out = f._eval(jet)
        if not isinstance(out, Jet):
            shape = jet.shape[:-2]
            return np.zeros(shape) if jet.depth == 1 else Jet.constant(np.zeros(shape), jet.depth - 1)
        out = out.promote(jet.depth)
        half = 1 << (jet.depth - 1)
        tail = out.data[..., half:]
        return tail[..., 0] if jet.depth == 1 else Jet(tail)

    name = f"D[{','.join(f'{c:g}' for c in np.asarray(direction, float))}]({f.name})"
    return _Composite(derivative, model, f.nesting + 1, name)


def directional(model: GroupModel, coeffs):
    """Shorthand returning ``f -> apply_field(coeffs, f)``."""
    return lambda f: apply_field(coeffs, f, model)


# -- test fields ---------------------------------------------------------------
class Polynomial:
    """Polynomial in the model coordinates, ``terms = [(coef, exponents)]``."""

    def __init__(self, terms, nvars):
        self.terms = [(float(c), tuple(int(e) for e in ex)) for c, ex in terms]
        self.nvars = nvars

    @property
    def degree(self):
        return max((sum(ex) for _, ex in self.terms), default=0)

    def __call__(self, coords):
        total = 0.0
        for coef, exps in self.terms:
            term = coef
            for var, e in zip(coords, exps):
                if e:
                    term = term * var**e
            total = total + term
        return total


def polynomial_field(model, terms, name=None) -> ScalarField:
    model = get_model(model)
    poly = Polynomial(terms, len(model.coordinate_names))
    return ScalarField(poly, model, name=name or "poly")


def coordinate_field(model, index) -> ScalarField:
    """The field returning one ambient coordinate."""
    model = get_model(model)
    nv = len(model.coordinate_names)
    exps = tuple(int(i == index) for i in range(nv))
    return polynomial_field(model, [(1.0, exps)], name=model.coordinate_names[index])


def constant_field(model, value) -> ScalarField:
    return ScalarField(lambda coords: value, model, name=f"const({value:g})")


def _random_terms(rng, nvars, max_degree, nterms, scale):
    terms = []
    for _ in range(nterms):
        degree = int(rng.integers(0, max_degree + 1))
        exps = np.zeros(nvars, dtype=int)
        for var in rng.integers(0, nvars, size=degree):
            exps[var] += 1
        terms.append((scale * rng.standard_normal(), tuple(exps)))
    return terms


def test_function_suite(model, seed, count, kind="mixed", max_degree=4, nterms=6):
    """Deterministic random test fields.

    ``kind='polynomial'`` gives polynomials of total degree at most
    ``max_degree`` in the ambient coordinates; ``kind='positive'`` gives
    ``exp`` of low-degree polynomials; ``'mixed'`` alternates the two.
    """
    model = get_model(model)
    rng = np.random.default_rng(seed)
    nvars = len(model.coordinate_names)
    fields = []
    for k in range(count):
        positive = kind == "positive" or (kind == "mixed" and k % 2 == 1)
        if positive:
            poly = Polynomial(_random_terms(rng, nvars, 2, nterms, 0.3), nvars)
            f = ScalarField(lambda c, p=poly: exp(p(c)), model, positive=True, name=f"exp_poly{k}")
        else:
            poly = Polynomial(_random_terms(rng, nvars, max_degree, nterms, 1.0), nvars)
            f = ScalarField(poly, model, name=f"poly{k}")
        f.polynomial = poly
        fields.append(f)
    return fields


test_function_suite.__test__ = False
