"""Polynomial vector fields, bracket expressions and graphical models.

A vector field on R^n is stored as ``n`` sparse polynomials, each a mapping
from exponent tuples to coefficients.  Coefficients may be ``int``,
``Fraction`` or ``float``; arithmetic on them is plain Python arithmetic so
rational fields stay exact under :func:`lie_bracket`.

Indices in the public API are 1-based, as in ``X_1 .. X_n``.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Real
from typing import Mapping, Sequence

import jsonschema
import numpy as np

from .errors import ModelIndexError, SchemaError

__all__ = [
    "PolyVectorField", "Leaf", "Bracket", "BracketExpr", "GraphicalModel",
    "Check", "ValidationReport", "eval_field", "lie_bracket",
    "eval_bracket_expr", "builtin_model", "load_model", "model_to_document",
    "validate_model", "parse_expr", "format_expr", "coordinate_field",
    "BUILTIN_MODELS",
]


# --------------------------------------------------------------------------
# sparse polynomials: dict {exponent tuple: coefficient}

def _clean(poly):
    return {e: c for e, c in poly.items() if c != 0}


def _padd(p, q, scale=1):
    out = dict(p)
    for e, c in q.items():
        out[e] = out.get(e, 0) + scale * c
    return _clean(out)


def _pmul(p, q):
    out = {}
    for (e1, c1), (e2, c2) in itertools.product(p.items(), q.items()):
        e = tuple(a + b for a, b in zip(e1, e2))
        out[e] = out.get(e, 0) + c1 * c2
    return _clean(out)


def _pdiff(p, var):
    out = {}
    for e, c in p.items():
        if e[var]:
            e2 = list(e)
            e2[var] -= 1
            e2 = tuple(e2)
            out[e2] = out.get(e2, 0) + c * e[var]
    return _clean(out)


def _normalize(c):
    # keep integers and fractions exact, collapse integral fractions
    if isinstance(c, bool):
        raise TypeError("boolean coefficient")
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c)
    return c


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    """A vector field on R^dim whose components are polynomials.

    ``components[k]`` maps exponent tuples of length ``dim`` to the
    coefficient of that monomial in the k-th component.
    """

    dim: int
    components: tuple

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        comps = tuple(self.components)
        if len(comps) != self.dim:
            raise ValueError(f"expected {self.dim} components, got {len(comps)}")
        frozen = []
        for comp in comps:
            clean = {}
            for e, c in dict(comp).items():
                e = tuple(int(a) for a in e)
                if len(e) != self.dim:
                    raise ValueError("exponent vector length must equal dim")
                if any(a < 0 for a in e):
                    raise ValueError("negative exponent: not a polynomial")
                if not isinstance(c, (Real, Fraction)):
                    raise TypeError(f"coefficient {c!r} is not a real number")
                if not np.isfinite(float(c)):
                    raise ValueError("non-finite coefficient")
                c = _normalize(c)
                if c != 0:
                    clean[e] = clean.get(e, 0) + c
            frozen.append(tuple(sorted(_clean(clean).items())))
        object.__setattr__(self, "components", tuple(frozen))

    # -- construction helpers
    @classmethod
    def zero(cls, dim):
        return cls(dim, [{}] * dim)

    @classmethod
    def from_dicts(cls, dim, comps):
        return cls(dim, list(comps))

    def poly(self, k):
        """Component k (0-based) as a fresh dict."""
        return dict(self.components[k])

    # -- algebra
    def __add__(self, other):
        _same_dim(self, other)
        return PolyVectorField(self.dim, [_padd(self.poly(k), other.poly(k))
                                          for k in range(self.dim)])

    def __sub__(self, other):
        _same_dim(self, other)
        return PolyVectorField(self.dim, [_padd(self.poly(k), other.poly(k), -1)
                                          for k in range(self.dim)])

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c):
        return PolyVectorField(self.dim, [{e: c * v for e, v in self.components[k]}
                                          for k in range(self.dim)])

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.dim == other.dim and self.components == other.components

    def __hash__(self):
        return hash((self.dim, tuple(tuple((e, float(c)) for e, c in comp)
                                     for comp in self.components)))

    def is_zero(self):
        return all(len(c) == 0 for c in self.components)

    @property
    def degree(self):
        degs = [sum(e) for comp in self.components for e, _ in comp]
        return max(degs, default=0)

    # -- evaluation
    def __call__(self, x):
        return eval_field(self, x)

    @cached_property
    def _flat(self):
        comp, coef, exps = [], [], []
        for k, terms in enumerate(self.components):
            for e, c in terms:
                comp.append(k)
                coef.append(float(c))
                exps.append(e)
        exps = np.array(exps, dtype=np.int64).reshape(len(comp), self.dim)
        return (np.array(comp, dtype=np.int64), np.array(coef, dtype=float), exps)

    def evaluate_many(self, pts):
        """Evaluate at each row of an (N, dim) array."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError("point dimension mismatch")
        comp, coef, exps = self._flat
        out = np.zeros_like(pts)
        if comp.size == 0:
            return out
        mono = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2) * coef
        for k in range(self.dim):
            sel = comp == k
            if sel.any():
                out[:, k] = mono[:, sel].sum(axis=1)
        return out

    def __repr__(self):
        parts = []
        for k, comp in enumerate(self.components):
            if comp:
                parts.append(f"({_poly_str(comp)})∂{k + 1}")
        return "PolyVectorField(" + (" + ".join(parts) or "0") + ")"


def _poly_str(comp):
    out = []
    for e, c in comp:
        mono = "·".join(f"x{i + 1}" + (f"^{a}" if a > 1 else "")
                        for i, a in enumerate(e) if a)
        out.append(f"{c}" + (f"·{mono}" if mono else ""))
    return " + ".join(out)


def _same_dim(f, g):
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")


def coordinate_field(dim, j, coeff=1):
    """The constant field ``coeff·∂_j`` on R^dim (1-based j)."""
    comps = [{} for _ in range(dim)]
    comps[j - 1] = {(0,) * dim: coeff}
    return PolyVectorField(dim, comps)


def eval_field(f: PolyVectorField, x) -> np.ndarray:
    """Evaluate ``f`` at the point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise ValueError(f"point has shape {x.shape}, field lives on R^{f.dim}")
    out = np.zeros(f.dim)
    for k, comp in enumerate(f.components):
        s = 0.0
        for e, c in comp:
            term = float(c)
            for xi, a in zip(x, e):
                if a:
                    term *= xi ** a
            s += term
        out[k] = s
    return out


def lie_bracket(f: PolyVectorField, g: PolyVectorField) -> PolyVectorField:
    """[f, g] = (Dg) f − (Df) g, computed on the coefficients."""
    _same_dim(f, g)
    n = f.dim
    comps = []
    for k in range(n):
        acc = {}
        gk, fk = g.poly(k), f.poly(k)
        for l in range(n):
            acc = _padd(acc, _pmul(f.poly(l), _pdiff(gk, l)))
            acc = _padd(acc, _pmul(g.poly(l), _pdiff(fk, l)), -1)
        comps.append(acc)
    return PolyVectorField(n, comps)


# --------------------------------------------------------------------------
# bracket expressions

@dataclass(frozen=True)
class Leaf:
    j: int
    k: int = 1

    def __post_init__(self):
        if not isinstance(self.j, int) or self.j < 1:
            raise ValueError("leaf index must be a positive integer")
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError("iteration count must be >= 1")

    @property
    def length(self):
        return 1

    def leaves(self):
        return [self.j]


@dataclass(frozen=True)
class Bracket:
    left: "BracketExpr"
    right: "BracketExpr"
    k: int = 1

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError("iteration count must be >= 1")

    @property
    def length(self):
        return self.left.length + self.right.length

    def leaves(self):
        return self.left.leaves() + self.right.leaves()


BracketExpr = Leaf | Bracket

_TOKEN = re.compile(r"\s*(\d+|\[|\]|,|\^)")


def parse_expr(text: str) -> BracketExpr:
    """Parse the nested syntax ``[1,[1,2]]^3`` (``^k`` is optional)."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"bad bracket expression near {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    tokens.append(None)
    idx = 0

    def peek():
        return tokens[idx]

    def take(expected=None):
        nonlocal idx
        tok = tokens[idx]
        if expected is not None and tok != expected:
            raise ValueError(f"expected {expected!r}, got {tok!r} in {text!r}")
        idx += 1
        return tok

    def iteration():
        if peek() == "^":
            take("^")
            tok = take()
            if tok is None or not tok.isdigit():
                raise ValueError(f"bad iteration count in {text!r}")
            return int(tok)
        return 1

    def node():
        tok = peek()
        if tok == "[":
            take("[")
            left = node()
            take(",")
            right = node()
            take("]")
            return Bracket(left, right, iteration())
        if tok is not None and tok.isdigit():
            take()
            return Leaf(int(tok), iteration())
        raise ValueError(f"unexpected token {tok!r} in {text!r}")

    e = node()
    if peek() is not None:
        raise ValueError(f"trailing input in {text!r}")
    return e


def format_expr(e: BracketExpr) -> str:
    suffix = f"^{e.k}" if e.k != 1 else ""
    if isinstance(e, Leaf):
        return f"{e.j}{suffix}"
    return f"[{format_expr(e.left)},{format_expr(e.right)}]{suffix}"


def _expr_from_doc(doc, q):
    if not isinstance(doc, Mapping):
        raise SchemaError("bracket expression node must be an object")
    k = doc.get("k", 1)
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise SchemaError("iteration count k must be a positive integer")
    if "leaf" in doc:
        j = doc["leaf"]
        if not isinstance(j, int) or isinstance(j, bool):
            raise SchemaError("leaf index must be an integer")
        if not 1 <= j <= q:
            raise ModelIndexError(f"leaf index {j} outside 1..{q}")
        return Leaf(j, k)
    if "bracket" in doc:
        pair = doc["bracket"]
        if not isinstance(pair, Sequence) or len(pair) != 2:
            raise SchemaError("bracket node needs exactly two children")
        return Bracket(_expr_from_doc(pair[0], q), _expr_from_doc(pair[1], q), k)
    raise SchemaError("bracket expression node needs 'leaf' or 'bracket'")


def _expr_to_doc(e):
    if isinstance(e, Leaf):
        return {"leaf": e.j, "k": e.k}
    return {"bracket": [_expr_to_doc(e.left), _expr_to_doc(e.right)], "k": e.k}


# --------------------------------------------------------------------------
# graphical models

@dataclass(frozen=True, eq=False)
class GraphicalModel:
    """Frame X_1..X_n on the ball B_r with vertical generators A_j."""

    n: int
    q: int
    radius: float
    frame: tuple
    generators: Mapping[int, BracketExpr]
    growth: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "frame", tuple(self.frame))
        object.__setattr__(self, "growth", tuple(int(g) for g in self.growth))
        object.__setattr__(self, "generators", dict(sorted(dict(self.generators).items())))
        if not 1 <= self.q <= self.n:
            raise ValueError("need 1 <= q <= n")
        if len(self.frame) != self.n:
            raise ValueError("frame must have n fields")
        for X in self.frame:
            if X.dim != self.n:
                raise ValueError("frame field dimension differs from n")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        for j, e in self.generators.items():
            if not self.q < j <= self.n:
                raise ModelIndexError(f"generator key {j} is not a vertical index")
            for leaf in e.leaves():
                if not 1 <= leaf <= self.q:
                    raise ModelIndexError(f"leaf index {leaf} outside 1..{self.q}")

    @property
    def r(self):
        return self.radius

    @property
    def step(self):
        return len(self.growth)

    @property
    def horizontal(self):
        return self.frame[: self.q]

    @cached_property
    def _horizontal_tables(self):
        from ._kernels import encode_fields
        return encode_fields(self.horizontal)

    def project(self, x):
        """π: the base coordinates."""
        return np.asarray(x, dtype=float)[..., : self.q]

    def vertical(self, x):
        """π_v: the vertical coordinates."""
        return np.asarray(x, dtype=float)[..., self.q:]

    def __eq__(self, other):
        if not isinstance(other, GraphicalModel):
            return NotImplemented
        return (self.n, self.q, float(self.radius), self.frame, self.generators,
                self.growth) == (other.n, other.q, float(other.radius), other.frame,
                                 other.generators, other.growth)

    __hash__ = None


def eval_bracket_expr(e: BracketExpr, model: GraphicalModel) -> PolyVectorField:
    """The field A(X) obtained by bracketing frame fields; iterations are inert."""
    if isinstance(e, Leaf):
        if not 1 <= e.j <= model.q:
            raise ModelIndexError(f"leaf index {e.j} outside 1..{model.q}")
        return model.frame[e.j - 1]
    return lie_bracket(eval_bracket_expr(e.left, model), eval_bracket_expr(e.right, model))


def _build(name, n, q, horizontal, generators, growth, radius=0.5):
    stub = GraphicalModel(n, q, radius,
                          list(horizontal) + [coordinate_field(n, j) for j in range(q + 1, n + 1)],
                          generators, growth, name)
    # vertical frame fields are the bracket fields themselves
    frame = list(horizontal)
    for j in range(q + 1, n + 1):
        frame.append(eval_bracket_expr(generators[j], stub))
    return GraphicalModel(n, q, radius, frame, generators, growth, name)


def _heisenberg():
    # x3' = -x2 x1' so that counter-clockwise loops rise by their area
    X1 = PolyVectorField(3, [{(0, 0, 0): 1}, {}, {(0, 1, 0): -1}])
    X2 = coordinate_field(3, 2)
    return _build("heisenberg", 3, 2, [X1, X2], {3: Bracket(Leaf(1), Leaf(2))}, (2, 3))


def _engel():
    X1 = coordinate_field(4, 1)
    X2 = PolyVectorField(4, [{}, {(0, 0, 0, 0): 1}, {(1, 0, 0, 0): 1},
                             {(2, 0, 0, 0): Fraction(1, 2)}])
    gens = {3: Bracket(Leaf(1), Leaf(2)), 4: Bracket(Leaf(1), Bracket(Leaf(1), Leaf(2)))}
    return _build("engel", 4, 2, [X1, X2], gens, (2, 3, 4))


def _cartan():
    X1 = coordinate_field(5, 1)
    X2 = PolyVectorField(5, [{}, {(0,) * 5: 1}, {(1, 0, 0, 0, 0): 1},
                             {(2, 0, 0, 0, 0): Fraction(1, 2)}, {(1, 1, 0, 0, 0): 1}])
    b12 = Bracket(Leaf(1), Leaf(2))
    gens = {3: b12, 4: Bracket(Leaf(1), b12), 5: Bracket(Leaf(2), b12)}
    return _build("cartan", 5, 2, [X1, X2], gens, (2, 3, 5))


BUILTIN_MODELS = {"heisenberg": _heisenberg, "engel": _engel, "cartan": _cartan}


def builtin_model(name: str) -> GraphicalModel:
    try:
        return BUILTIN_MODELS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None


_SCHEMA = {
    "type": "object",
    "required": ["n", "q", "radius", "frame", "generators", "growth"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "q": {"type": "integer", "minimum": 1},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "name": {"type": "string"},
        "frame": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["coeff", "exponents"],
                        "properties": {
                            "coeff": {"type": "number"},
                            "exponents": {"type": "array", "items": {"type": "integer"}},
                        },
                    },
                },
            },
        },
        "generators": {"type": "object"},
        "growth": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    },
}


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise SchemaError(f"duplicate key {key!r}")
        out[key] = value
    return out


def load_model(document) -> GraphicalModel:
    """Parse a model from a JSON string, bytes, or an already-decoded mapping."""
    if isinstance(document, (str, bytes, bytearray)):
        try:
            document = json.loads(document, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(document, _SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(exc.message) from exc
    n, q = document["n"], document["q"]
    if q > n:
        raise SchemaError("q must not exceed n")
    frame_doc = document["frame"]
    if len(frame_doc) != n:
        raise SchemaError(f"frame must list {n} fields")
    frame = []
    for fdoc in frame_doc:
        if len(fdoc) != n:
            raise SchemaError(f"each frame field needs {n} components")
        comps = []
        for cdoc in fdoc:
            poly = {}
            for term in cdoc:
                e = tuple(term["exponents"])
                if len(e) != n:
                    raise SchemaError("exponent vector length must equal n")
                if any(a < 0 for a in e):
                    raise SchemaError("negative exponent: component is not polynomial")
                poly[e] = poly.get(e, 0) + term["coeff"]
            comps.append(poly)
        frame.append(PolyVectorField(n, comps))
    gens = {}
    for key, tree in document["generators"].items():
        try:
            j = int(key)
        except ValueError:
            raise SchemaError(f"generator key {key!r} is not an integer") from None
        if j in gens:
            raise SchemaError(f"duplicate vertical generator for index {j}")
        if not q < j <= n:
            raise ModelIndexError(f"generator key {j} outside {q + 1}..{n}")
        gens[j] = _expr_from_doc(tree, q)
    return GraphicalModel(n, q, document["radius"], frame, gens,
                          tuple(document["growth"]), document.get("name", ""))


def model_to_document(model: GraphicalModel) -> dict:
    frame = []
    for X in model.frame:
        frame.append([[{"coeff": float(c) if isinstance(c, Fraction) else c,
                        "exponents": list(e)} for e, c in comp]
                      for comp in X.components])
    doc = {"n": model.n, "q": model.q, "radius": float(model.radius), "frame": frame,
           "generators": {str(j): _expr_to_doc(e) for j, e in model.generators.items()},
           "growth": list(model.growth)}
    if model.name:
        doc["name"] = model.name
    return doc


# --------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    tol: float | None
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "residual": self.residual,
                "tol": self.tol, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    constant: float

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {"passed": self.passed, "C": self.constant,
                "checks": [c.as_dict() for c in self.checks]}


def _sample_grid(n, r):
    per_axis = max(3, int(round(20000 ** (1.0 / n))))
    if per_axis % 2 == 0:
        per_axis += 1
    ax = np.linspace(-r, r, per_axis)
    pts = np.array(list(itertools.product(ax, repeat=n)))
    norms = np.linalg.norm(pts, axis=1)
    keep = (norms > 0) & (norms <= r * (1 + 1e-12))
    return pts[keep], norms[keep]


def flag_ranks(model: GraphicalModel, levels: int, tol=1e-9):
    """Ranks at the origin of the iterated-bracket flag, one per level."""
    origin = np.zeros(model.n)
    first = list(model.horizontal)
    layer = list(first)
    vectors = [X(origin) for X in first]
    ranks = [int(np.linalg.matrix_rank(np.array(vectors), tol=tol))]
    for _ in range(1, levels):
        layer = [lie_bracket(a, b) for a in first for b in layer]
        vectors.extend(F(origin) for F in layer)
        ranks.append(int(np.linalg.matrix_rank(np.array(vectors), tol=tol)))
    return ranks


def validate_model(model: GraphicalModel, tol: float = 1e-12) -> ValidationReport:
    """Check conditions (a)-(e) of a graphical model; never raises."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    n, q = model.n, model.q
    origin = np.zeros(n)
    checks = []

    # (a) base components of the horizontal frame are the coordinate basis, symbolically
    res_a = 0.0
    for j in range(q):
        X = model.frame[j]
        for k in range(q):
            target = {(0,) * n: 1} if k == j else {}
            diff = _padd(X.poly(k), target, -1)
            res_a = max(res_a, sum(abs(float(c)) for c in diff.values()))
    checks.append(Check("a_base_components", res_a == 0.0, res_a, 0.0,
                        "components 1..q of X_j equal ∂_j exactly"))

    # (b) X_j(0) = ∂_j
    eye = np.eye(n)
    res_b = max(float(np.max(np.abs(X(origin) - eye[j]))) for j, X in enumerate(model.frame))
    checks.append(Check("b_origin_frame", res_b <= tol, res_b, tol))

    # (c) generators evaluate to ∂_j at the origin
    res_c = 0.0
    detail = ""
    for j in range(q + 1, n + 1):
        e = model.generators.get(j)
        if e is None:
            res_c = float("inf")
            detail = f"no generator for index {j}"
            break
        try:
            val = eval_bracket_expr(e, model)(origin)
        except (ModelIndexError, ValueError) as exc:
            res_c, detail = float("inf"), str(exc)
            break
        res_c = max(res_c, float(np.max(np.abs(val - eye[j - 1]))))
    checks.append(Check("c_generators", res_c <= tol, res_c, tol, detail))

    # (d) flag ranks against the declared growth vector
    growth = list(model.growth)
    ok_shape = bool(growth) and growth[0] == q and growth[-1] == n and all(
        a <= b for a, b in zip(growth, growth[1:]))
    ranks = flag_ranks(model, len(growth)) if growth else []
    res_d = float(max((abs(a - b) for a, b in zip(ranks, growth)), default=0))
    checks.append(Check("d_growth", ok_shape and res_d == 0.0, res_d, 0.0,
                        f"computed {ranks}, declared {growth}"))

    # (e) frame deviation constant C on a grid in B_r
    pts, norms = _sample_grid(n, float(model.radius))
    C = 0.0
    for j, X in enumerate(model.frame):
        dev = np.linalg.norm(X.evaluate_many(pts) - eye[j], axis=1) / norms
        C = max(C, float(dev.max()))
    checks.append(Check("e_frame_deviation", bool(np.isfinite(C)), C, None,
                        "max |X_j(x) - ∂_j| / |x| over the sample grid"))
    return ValidationReport(tuple(checks), C)
