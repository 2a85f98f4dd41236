"""Reverse-mode autodiff tape and degree-2 Taylor jets.

The tape records a scalar computation graph over trainable parameters.
Node values may be plain floats or 1-d arrays: an array node represents
the same scalar expression evaluated simultaneously at many spatial
points, with scalar parameters broadcast against it.  Spatial
derivatives are obtained by pushing degree-2 jets (value, d/dx, d2/dx2)
forward through the graph; every jet coefficient is itself a tape node,
so parameter gradients flow through first and second x-derivatives.
"""

import numpy as np

__all__ = [
    "Tape",
    "Jet2",
    "leaf",
    "primitive",
    "backward",
    "jet_primitive",
    "seed_jet",
    "const_jet",
]

_UNARY = frozenset({"neg", "exp", "sin", "cos", "tanh"})
_BINARY = frozenset({"add", "sub", "mul", "div"})


def _as_value(x):
    if isinstance(x, (float, int)):
        return float(x)
    return np.asarray(x, dtype=np.float64)


class Tape:
    """Append-only computation graph.

    Each node stores its value, at most two parent indices and the
    matching local partial derivatives.  Parents always precede
    children, so one reverse sweep propagates adjoints exactly.
    A tape is single-threaded and is meant to be rebuilt per
    optimization step; a reverse sweep never mutates values.
    """

    def __init__(self):
        self.vals = []
        # parallel records: (kind, parent1, parent2, partial1, partial2)
        self.recs = []
        self._const_cache = {}

    def __len__(self):
        return len(self.vals)

    def kind(self, i: int) -> str:
        return self.recs[i][0]

    def parents(self, i: int) -> tuple:
        _, p1, p2, _, _ = self.recs[i]
        if p1 < 0:
            return ()
        if p2 < 0:
            return (p1,)
        return (p1, p2)

    def value(self, i: int):
        return self.vals[i]

    # -- node constructors -------------------------------------------------

    def leaf(self, value) -> int:
        self.vals.append(_as_value(value))
        self.recs.append(("leaf", -1, -1, None, None))
        return len(self.vals) - 1

    def const(self, value: float) -> int:
        """Leaf for a literal constant, cached so repeats share a node."""
        key = float(value)
        ref = self._const_cache.get(key)
        if ref is None:
            ref = self.leaf(key)
            self._const_cache[key] = ref
        return ref

    def add(self, a: int, b: int) -> int:
        self.vals.append(self.vals[a] + self.vals[b])
        self.recs.append(("add", a, b, 1.0, 1.0))
        return len(self.vals) - 1

    def sub(self, a: int, b: int) -> int:
        self.vals.append(self.vals[a] - self.vals[b])
        self.recs.append(("sub", a, b, 1.0, -1.0))
        return len(self.vals) - 1

    def mul(self, a: int, b: int) -> int:
        va, vb = self.vals[a], self.vals[b]
        self.vals.append(va * vb)
        self.recs.append(("mul", a, b, vb, va))
        return len(self.vals) - 1

    def div(self, a: int, b: int) -> int:
        va, vb = self.vals[a], self.vals[b]
        if np.ndim(vb) == 0:
            if vb == 0.0:
                raise ZeroDivisionError("division node with zero divisor")
        elif not np.all(vb != 0.0):
            raise ZeroDivisionError("division node with zero divisor")
        inv = 1.0 / vb
        out = va * inv
        self.vals.append(out)
        self.recs.append(("div", a, b, inv, -out * inv))
        return len(self.vals) - 1

    def neg(self, a: int) -> int:
        self.vals.append(-self.vals[a])
        self.recs.append(("neg", a, -1, -1.0, None))
        return len(self.vals) - 1

    def exp(self, a: int) -> int:
        out = np.exp(self.vals[a])
        self.vals.append(out)
        self.recs.append(("exp", a, -1, out, None))
        return len(self.vals) - 1

    def sin(self, a: int) -> int:
        va = self.vals[a]
        self.vals.append(np.sin(va))
        self.recs.append(("sin", a, -1, np.cos(va), None))
        return len(self.vals) - 1

    def cos(self, a: int) -> int:
        va = self.vals[a]
        self.vals.append(np.cos(va))
        self.recs.append(("cos", a, -1, -np.sin(va), None))
        return len(self.vals) - 1

    def tanh(self, a: int) -> int:
        t = np.tanh(self.vals[a])
        self.vals.append(t)
        self.recs.append(("tanh", a, -1, 1.0 - t * t, None))
        return len(self.vals) - 1

    def powi(self, a: int, n: int) -> int:
        """Integer power a**n; n is a structural constant, not a node."""
        if n != int(n):
            raise ValueError("powi exponent must be an integer")
        n = int(n)
        va = self.vals[a]
        if n < 0:
            if np.ndim(va) == 0:
                if va == 0.0:
                    raise ZeroDivisionError("powi with zero base and negative exponent")
            elif not np.all(va != 0.0):
                raise ZeroDivisionError("powi with zero base and negative exponent")
        self.vals.append(va ** n)
        self.recs.append(("powi", a, -1, n * va ** (n - 1) if n != 0 else 0.0, None))
        return len(self.vals) - 1

    def weighted_sum(self, a: int, weights: np.ndarray) -> int:
        """Scalar node sum_q w_q * a_q for a constant weight vector.

        Local partial w.r.t. each slot of `a` is w_q, so the reverse
        sweep is exact; this is how quadrature sums stay on the tape.
        """
        w = np.asarray(weights, dtype=np.float64)
        self.vals.append(float(np.dot(w, self.vals[a])))
        self.recs.append(("wsum", a, -1, w, None))
        return len(self.vals) - 1


def leaf(tape: Tape, value) -> int:
    """Append a parentless node holding `value`; returns its index."""
    return tape.leaf(value)


def primitive(tape: Tape, kind: str, a: int, b: int | None = None) -> int:
    """Append one arithmetic node.  Supported kinds are closed:
    add, sub, mul, div, neg, exp, sin, cos, tanh and powi (with `b`
    the integer exponent)."""
    if kind in _BINARY:
        if b is None:
            raise ValueError(f"{kind} needs two operands")
        return getattr(tape, kind)(a, b)
    if kind in _UNARY:
        if b is not None:
            raise ValueError(f"{kind} takes one operand")
        return getattr(tape, kind)(a)
    if kind == "powi":
        return tape.powi(a, b)
    raise ValueError(f"unsupported primitive kind: {kind!r}")


def backward(tape: Tape, loss: int, params: list[int]) -> np.ndarray:
    """One reverse sweep from `loss`; returns d(loss)/d(theta_i) in the
    order given by `params`, which must be leaf nodes on this tape."""
    n = len(tape)
    if not 0 <= loss < n:
        raise ValueError("loss node is not on this tape")
    recs = tape.recs
    vals = tape.vals
    for p in params:
        if not 0 <= p < n:
            raise ValueError(f"parameter node {p} is not on this tape")
        if recs[p][0] != "leaf":
            raise ValueError(f"parameter node {p} is not a leaf")

    # Scalar parents broadcast up during the forward pass; their adjoint
    # is the sum of contributions over the broadcast axis.
    ndarray = np.ndarray
    adj = [None] * (loss + 1)
    adj[loss] = 1.0
    for i in range(loss, -1, -1):
        a = adj[i]
        if a is None:
            continue
        _, p1, p2, d1, d2 = recs[i]
        if p1 >= 0:
            contrib = d1 * a
            if isinstance(contrib, ndarray) and not isinstance(vals[p1], ndarray):
                contrib = contrib.sum()
            cur = adj[p1]
            adj[p1] = contrib if cur is None else cur + contrib
        if p2 >= 0:
            contrib = d2 * a
            if isinstance(contrib, ndarray) and not isinstance(vals[p2], ndarray):
                contrib = contrib.sum()
            cur = adj[p2]
            adj[p2] = contrib if cur is None else cur + contrib

    out = np.empty(len(params), dtype=np.float64)
    for k, p in enumerate(params):
        g = adj[p] if p <= loss else None
        out[k] = 0.0 if g is None else float(np.sum(g)) if np.ndim(g) else float(g)
    return out


class Jet2:
    """Degree-2 Taylor jet (f, f', f'') of a quantity at a point.

    Each coefficient is a tape node index, so anything computed from a
    jet stays differentiable w.r.t. the parameters.  Arithmetic follows
    the truncated Faa di Bruno rules.
    """

    __slots__ = ("tape", "c0", "c1", "c2")

    def __init__(self, tape: Tape, c0: int, c1: int, c2: int):
        self.tape = tape
        self.c0 = c0
        self.c1 = c1
        self.c2 = c2

    def values(self) -> tuple:
        v = self.tape.vals
        return (v[self.c0], v[self.c1], v[self.c2])

    # -- jet algebra (every coefficient op is a tape primitive) -----------

    def _coerce(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return const_jet(self.tape, float(other))

    def __add__(self, other):
        return jet_primitive("add", self, self._coerce(other))

    def __radd__(self, other):
        return self._coerce(other).__add__(self)

    def __sub__(self, other):
        return jet_primitive("sub", self, self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        return jet_primitive("mul", self, self._coerce(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        return jet_primitive("div", self, self._coerce(other))

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __neg__(self):
        return jet_primitive("neg", self)

    def __pow__(self, n: int):
        return jet_primitive("powi", self, n)

    def exp(self):
        return jet_primitive("exp", self)

    def sin(self):
        return jet_primitive("sin", self)

    def cos(self):
        return jet_primitive("cos", self)

    def tanh(self):
        return jet_primitive("tanh", self)

    def scale(self, node: int) -> "Jet2":
        """Multiply by a quantity that does not depend on the jet
        variable (e.g. a network weight): all three coefficients scale."""
        t = self.tape
        return Jet2(t, t.mul(node, self.c0), t.mul(node, self.c1), t.mul(node, self.c2))

    def shift(self, node: int) -> "Jet2":
        """Add a quantity independent of the jet variable: only the
        value coefficient moves."""
        t = self.tape
        return Jet2(t, t.add(self.c0, node), self.c1, self.c2)


def seed_jet(tape: Tape, x) -> Jet2:
    """Jet of the spatial variable itself: (x, 1, 0)."""
    return Jet2(tape, tape.leaf(x), tape.const(1.0), tape.const(0.0))


def const_jet(tape: Tape, value) -> Jet2:
    """Jet of a quantity with no spatial dependence: (v, 0, 0)."""
    z = tape.const(0.0)
    if isinstance(value, (float, int)):
        return Jet2(tape, tape.const(float(value)), z, z)
    return Jet2(tape, tape.leaf(value), z, z)


def node_jet(tape: Tape, node: int) -> Jet2:
    """Wrap an existing node (e.g. a parameter) as an x-independent jet."""
    z = tape.const(0.0)
    return Jet2(tape, node, z, z)


def _unary_jet(tape, a: Jet2, f0: int, f1: int, f2: int) -> Jet2:
    # chain rule truncated at degree 2:
    #   out' = f'(a0) a1,  out'' = f'(a0) a2 + f''(a0) a1^2
    c1 = tape.mul(f1, a.c1)
    c2 = tape.add(tape.mul(f1, a.c2), tape.mul(f2, tape.mul(a.c1, a.c1)))
    return Jet2(tape, f0, c1, c2)


def jet_primitive(kind: str, a: Jet2, b=None) -> Jet2:
    """Apply one supported primitive to jets, propagating all three
    Taylor coefficients.  Binary operands must share a tape."""
    t = a.tape
    if kind in ("add", "sub"):
        if b.tape is not t:
            raise ValueError("operand jets live on different tapes")
        op = t.add if kind == "add" else t.sub
        return Jet2(t, op(a.c0, b.c0), op(a.c1, b.c1), op(a.c2, b.c2))
    if kind == "mul":
        if b.tape is not t:
            raise ValueError("operand jets live on different tapes")
        c0 = t.mul(a.c0, b.c0)
        c1 = t.add(t.mul(a.c0, b.c1), t.mul(a.c1, b.c0))
        two = t.const(2.0)
        mid = t.mul(two, t.mul(a.c1, b.c1))
        c2 = t.add(t.add(t.mul(a.c0, b.c2), mid), t.mul(a.c2, b.c0))
        return Jet2(t, c0, c1, c2)
    if kind == "div":
        if b.tape is not t:
            raise ValueError("operand jets live on different tapes")
        # q = a/b; from a = q b:  q1 = (a1 - q0 b1)/b0,
        # q2 = (a2 - q0 b2 - 2 q1 b1)/b0
        q0 = t.div(a.c0, b.c0)
        q1 = t.div(t.sub(a.c1, t.mul(q0, b.c1)), b.c0)
        two = t.const(2.0)
        num = t.sub(t.sub(a.c2, t.mul(q0, b.c2)), t.mul(two, t.mul(q1, b.c1)))
        q2 = t.div(num, b.c0)
        return Jet2(t, q0, q1, q2)
    if kind == "neg":
        return Jet2(t, t.neg(a.c0), t.neg(a.c1), t.neg(a.c2))
    if kind == "exp":
        f0 = t.exp(a.c0)
        return _unary_jet(t, a, f0, f0, f0)
    if kind == "sin":
        f0 = t.sin(a.c0)
        f1 = t.cos(a.c0)
        return _unary_jet(t, a, f0, f1, t.neg(f0))
    if kind == "cos":
        f0 = t.cos(a.c0)
        f1 = t.neg(t.sin(a.c0))
        return _unary_jet(t, a, f0, f1, t.neg(f0))
    if kind == "tanh":
        f0 = t.tanh(a.c0)
        one = t.const(1.0)
        f1 = t.sub(one, t.mul(f0, f0))  # 1 - tanh^2
        minus_two = t.const(-2.0)
        f2 = t.mul(minus_two, t.mul(f0, f1))
        return _unary_jet(t, a, f0, f1, f2)
    if kind == "powi":
        n = int(b)
        f0 = t.powi(a.c0, n)
        f1 = t.mul(t.const(float(n)), t.powi(a.c0, n - 1)) if n != 0 else t.const(0.0)
        if n in (0, 1):
            f2 = t.const(0.0)
        else:
            f2 = t.mul(t.const(float(n * (n - 1))), t.powi(a.c0, n - 2))
        return _unary_jet(t, a, f0, f1, f2)
    raise ValueError(f"unsupported jet primitive kind: {kind!r}")
