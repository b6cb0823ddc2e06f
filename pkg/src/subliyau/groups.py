"""Matrix realizations of the three model groups.

Every group is stored as real matrices acting on ambient coordinates:

* Heisenberg: 3x3 unit upper-triangular matrices, ``x = g[0, 1]``,
  ``y = g[1, 2]``, ``z = g[0, 2]``.
* SU(2): complex 2x2 matrices realified to 4x4 real matrices
  ``[[Re, -Im], [Im, Re]]`` so that a single real dtype is used throughout.
* SL(2): real 2x2 matrices.

Lie algebra elements are coefficient arrays ``(..., 3)`` meaning
``a*X + b*Y + c*Z``.  The basis satisfies ``[X, Y] = Z``,
``[X, Z] = -rho*Y`` and ``[Y, Z] = rho*X``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RENORM_INTERVAL = 64


class ModelMismatchError(ValueError):
    """Raised when combining elements of two different groups."""


def realify(m: np.ndarray) -> np.ndarray:
    """Complex ``(..., n, n)`` matrices to real ``(..., 2n, 2n)`` block form."""
    re, im = np.real(m), np.imag(m)
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def complexify(m: np.ndarray) -> np.ndarray:
    n = m.shape[-1] // 2
    return m[..., :n, :n] + 1j * m[..., n:, :n]


def _heisenberg_basis():
    X = np.zeros((3, 3))
    Y = np.zeros((3, 3))
    Z = np.zeros((3, 3))
    X[0, 1] = 1.0
    Y[1, 2] = 1.0
    Z[0, 2] = 1.0
    return np.stack([X, Y, Z])


def _su2_basis():
    X = 0.5 * np.array([[0, 1], [-1, 0]], dtype=complex)
    Y = 0.5 * np.array([[0, 1j], [1j, 0]])
    Z = 0.5 * np.array([[1j, 0], [0, -1j]])
    return realify(np.stack([X, Y, Z]))


def _sl2_basis():
    X = 0.5 * np.array([[1.0, 0.0], [0.0, -1.0]])
    Y = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]])
    Z = 0.5 * np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.stack([X, Y, Z])


@dataclass(frozen=True, eq=False)
class GroupModel:
    """One of the three model groups.

    ``rho`` is the curvature parameter appearing in the structure constants.
    """

    name: str
    rho: float
    basis: np.ndarray = field(repr=False)
    coordinate_names: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return self.basis.shape[-1]

    def __eq__(self, other):
        return isinstance(other, GroupModel) and other.name == self.name

    def __hash__(self):
        return hash(self.name)

    # -- algebra ---------------------------------------------------------
    def embed(self, coeffs) -> np.ndarray:
        """Matrix of ``a*X + b*Y + c*Z`` for coefficient arrays ``(..., 3)``."""
        coeffs = np.asarray(coeffs, dtype=float)
        return np.einsum("...i,ijk->...jk", coeffs, self.basis)

    def bracket(self, a, b) -> np.ndarray:
        return bracket(a, b, self.rho)

    # -- group -----------------------------------------------------------
    def identity(self) -> np.ndarray:
        return np.eye(self.size)

    def exp(self, coeffs) -> np.ndarray:
        """Closed-form exponential of algebra elements ``(..., 3)``."""
        coeffs = np.asarray(coeffs, dtype=float)
        m = self.embed(coeffs)
        eye = np.broadcast_to(np.eye(self.size), m.shape)
        if self.name == "heisenberg":
            return eye + m + 0.5 * (m @ m)
        a, b, c = coeffs[..., 0], coeffs[..., 1], coeffs[..., 2]
        # m @ m = delta * I for both 2x2 trace-free realizations
        if self.name == "su2":
            delta = -0.25 * (a * a + b * b + c * c)
        else:
            delta = 0.25 * (a * a + b * b - c * c)
        cosine, sinc = _cos_sinc(delta)
        return cosine[..., None, None] * eye + sinc[..., None, None] * m

    def inverse(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if self.name == "heisenberg":
            x, y, z = g[..., 0, 1], g[..., 1, 2], g[..., 0, 2]
            return heisenberg_matrix(-x, -y, -z + x * y)
        if self.name == "su2":
            # adjugate of [[a, b], [c, d]] is [[d, -b], [-c, a]]
            m = complexify(g)
            adj = np.empty_like(m)
            adj[..., 0, 0] = m[..., 1, 1]
            adj[..., 1, 1] = m[..., 0, 0]
            adj[..., 0, 1] = -m[..., 0, 1]
            adj[..., 1, 0] = -m[..., 1, 0]
            return realify(adj)
        adj = np.empty_like(g)
        adj[..., 0, 0] = g[..., 1, 1]
        adj[..., 1, 1] = g[..., 0, 0]
        adj[..., 0, 1] = -g[..., 0, 1]
        adj[..., 1, 0] = -g[..., 1, 0]
        return adj

    def renormalize(self, g: np.ndarray) -> np.ndarray:
        """Project matrices back onto the group to remove round-off drift."""
        g = np.array(g, dtype=float)
        if self.name == "heisenberg":
            return heisenberg_matrix(g[..., 0, 1], g[..., 1, 2], g[..., 0, 2])
        if self.name == "su2":
            m = complexify(g)
            col = m[..., :, 0]
            col = col / np.linalg.norm(col, axis=-1, keepdims=True)
            a, c = col[..., 0], col[..., 1]
            out = np.empty_like(m)
            out[..., 0, 0] = a
            out[..., 1, 0] = c
            out[..., 0, 1] = -np.conj(c)
            out[..., 1, 1] = np.conj(a)
            return realify(out)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        return g / np.sqrt(det)[..., None, None]

    def membership_error(self, g: np.ndarray) -> np.ndarray:
        """Max violation of the group constraints, per matrix."""
        g = np.asarray(g, dtype=float)
        if self.name == "heisenberg":
            ref = heisenberg_matrix(g[..., 0, 1], g[..., 1, 2], g[..., 0, 2])
            return np.abs(g - ref).max(axis=(-2, -1))
        if self.name == "su2":
            m = complexify(g)
            herm = np.conj(np.swapaxes(m, -1, -2))
            unit = np.abs(m @ herm - np.eye(2)).max(axis=(-2, -1))
            det = np.abs(np.linalg.det(m) - 1.0)
            # realified form must keep its block structure
            block = np.abs(realify(m) - g).max(axis=(-2, -1))
            return np.maximum(np.maximum(unit, det), block)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        return np.abs(det - 1.0)

    def coordinates(self, g) -> list:
        """Ambient coordinates used by scalar fields.

        Works for plain arrays and for jet-valued matrices since only
        indexing is involved.
        """
        if self.name == "heisenberg":
            return [g[..., 0, 1], g[..., 1, 2], g[..., 0, 2]]
        if self.name == "su2":
            return [g[..., i, j] for i in (0, 2) for j in (0, 1)] + [
                g[..., i, j] for i in (1, 3) for j in (0, 1)
            ]
        return [g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]]

    def random_coefficients(self, seed, size=None, scale=1.0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        shape = (3,) if size is None else tuple(np.atleast_1d(size)) + (3,)
        return scale * rng.standard_normal(shape)

    def random_element(self, seed, size=None, scale=1.0) -> np.ndarray:
        """``exp`` of a Gaussian algebra element; deterministic per seed."""
        return self.exp(self.random_coefficients(seed, size, scale))


def _cos_sinc(delta):
    """``C, S`` with ``exp(M) = C*I + S*M`` whenever ``M @ M = delta*I``."""
    delta = np.asarray(delta, dtype=float)
    s = np.sqrt(np.abs(delta))
    pos = delta >= 0
    cosine = np.where(pos, np.cosh(s), np.cos(s))
    small = s < 1e-4
    safe = np.where(small, 1.0, s)
    sinc = np.where(pos, np.sinh(safe), np.sin(safe)) / safe
    sinc = np.where(small, 1.0 + delta / 6.0 + delta * delta / 120.0, sinc)
    return cosine, sinc


def heisenberg_matrix(x, y, z) -> np.ndarray:
    x, y, z = np.broadcast_arrays(
        np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    )
    g = np.zeros(x.shape + (3, 3))
    g[..., 0, 0] = g[..., 1, 1] = g[..., 2, 2] = 1.0
    g[..., 0, 1] = x
    g[..., 1, 2] = y
    g[..., 0, 2] = z
    return g


def bracket(a, b, rho: float) -> np.ndarray:
    """Lie bracket of coefficient arrays under the rho-structure constants."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    xy = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    xz = a[..., 0] * b[..., 2] - a[..., 2] * b[..., 0]
    yz = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    return np.stack([rho * yz, -rho * xz, xy], axis=-1)


HEISENBERG = GroupModel("heisenberg", 0.0, _heisenberg_basis(), ("x", "y", "z"))
SU2 = GroupModel(
    "su2",
    1.0,
    _su2_basis(),
    ("re_a", "re_b", "re_c", "re_d", "im_a", "im_b", "im_c", "im_d"),
)
SL2 = GroupModel("sl2", -1.0, _sl2_basis(), ("a", "b", "c", "d"))

MODELS = {m.name: m for m in (HEISENBERG, SU2, SL2)}

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])


def get_model(name) -> GroupModel:
    if isinstance(name, GroupModel):
        return name
    key = str(name).lower().replace("(", "").replace(")", "")
    if key not in MODELS:
        raise KeyError(f"unknown model {name!r}; expected one of {sorted(MODELS)}")
    return MODELS[key]


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A single group element tagged with its model."""

    model: GroupModel
    matrix: np.ndarray

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def coordinates(self) -> np.ndarray:
        return np.array(self.model.coordinates(self.matrix))


def element(model, matrix) -> GroupElement:
    return GroupElement(get_model(model), np.asarray(matrix, dtype=float))


def identity(model) -> GroupElement:
    model = get_model(model)
    return GroupElement(model, model.identity())


def group_exp(coeffs, model) -> GroupElement:
    model = get_model(model)
    return GroupElement(model, model.exp(coeffs))


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    if g.model != h.model:
        raise ModelMismatchError(f"cannot multiply {g.model.name} by {h.model.name}")
    return GroupElement(g.model, g.matrix @ h.matrix)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(g.model, g.model.inverse(g.matrix))


def random_element(model, seed) -> GroupElement:
    model = get_model(model)
    return GroupElement(model, model.random_element(seed))


def product(model, matrices, renorm_interval: int = RENORM_INTERVAL) -> np.ndarray:
    """Ordered product of a sequence of matrices with periodic renormalization."""
    model = get_model(model)
    out = model.identity()
    for k, m in enumerate(matrices, start=1):
        out = out @ m
        if renorm_interval and k % renorm_interval == 0:
            out = model.renormalize(out)
    return out
