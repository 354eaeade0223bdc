"""Exact arithmetic in the multiquadratic field Q(sqrt2, sqrt3, sqrt5).

Elements are stored over the fixed basis

    B = (1, sqrt2, sqrt3, sqrt5, sqrt6, sqrt10, sqrt15, sqrt30)

as eight integer numerators over one positive common denominator, reduced
so that the gcd of everything is 1.  Equality is therefore syntactic.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import reduce
from numbers import Rational

# squarefree radicand of each basis element, in basis order
RADICANDS = (1, 2, 3, 5, 6, 10, 15, 30)
BASIS_LABELS = ("1", "sqrt2", "sqrt3", "sqrt5", "sqrt6", "sqrt10", "sqrt15", "sqrt30")
_PRIMES = (2, 3, 5)


def _mask(m: int) -> int:
    return sum(1 << i for i, p in enumerate(_PRIMES) if m % p == 0)


_MASKS = tuple(_mask(m) for m in RADICANDS)
_INDEX_OF_MASK = {mk: i for i, mk in enumerate(_MASKS)}


def _product_table():
    table = {}
    for i, mi in enumerate(_MASKS):
        for j, mj in enumerate(_MASKS):
            common = mi & mj
            factor = math.prod(p for b, p in enumerate(_PRIMES) if common >> b & 1)
            table[i, j] = (_INDEX_OF_MASK[mi ^ mj], factor)
    return table


# e_i * e_j = factor * e_k
PRODUCT = _product_table()
_SQRT_FLOAT = tuple(math.sqrt(m) for m in RADICANDS)
# sign flips of the Galois automorphisms sqrt p -> -sqrt p
_CONJ_SIGNS = {
    p: tuple(-1 if _MASKS[i] >> b & 1 else 1 for i in range(8))
    for b, p in enumerate(_PRIMES)
}


class FieldDivisionError(ZeroDivisionError):
    pass


class FieldElement:
    """Immutable element of Q(sqrt2, sqrt3, sqrt5)."""

    __slots__ = ("_num", "_den", "_hash")

    def __init__(self, coeffs=None):
        if coeffs is None:
            coeffs = (0,) * 8
        coeffs = tuple(coeffs)
        if len(coeffs) != 8:
            raise ValueError("a field element needs exactly 8 coordinates")
        fr = [Fraction(c) for c in coeffs]
        den = reduce(math.lcm, (f.denominator for f in fr), 1)
        self._set(tuple(f.numerator * (den // f.denominator) for f in fr), den)

    def _set(self, num, den):
        g = reduce(math.gcd, num, den)
        if den < 0:
            g = -g
        if g != 1:
            num = tuple(n // g for n in num)
            den //= g
        self._num = num
        self._den = den
        self._hash = None

    @classmethod
    def _raw(cls, num, den) -> "FieldElement":
        obj = cls.__new__(cls)
        obj._set(num, den)
        return obj

    @classmethod
    def from_rational(cls, q) -> "FieldElement":
        q = Fraction(q)
        return cls._raw((q.numerator, 0, 0, 0, 0, 0, 0, 0), q.denominator)

    @classmethod
    def sqrt(cls, m: int) -> "FieldElement":
        """sqrt(m) for m in {1, 2, 3, 5, 6, 10, 15, 30}."""
        if m not in RADICANDS:
            raise ValueError(f"sqrt({m}) is not a basis element")
        num = [0] * 8
        num[RADICANDS.index(m)] = 1
        return cls._raw(tuple(num), 1)

    # -- coordinates -------------------------------------------------------

    @property
    def coeffs(self) -> tuple:
        return tuple(Fraction(n, self._den) for n in self._num)

    @property
    def denominator(self) -> int:
        return self._den

    def is_zero(self) -> bool:
        return not any(self._num)

    def is_rational(self) -> bool:
        return not any(self._num[1:])

    def is_integer(self) -> bool:
        return self.is_rational() and self._den == 1

    def rational_part(self) -> Fraction:
        return Fraction(self._num[0], self._den)

    # -- arithmetic ---------------------------------------------------------

    @staticmethod
    def _coerce(other):
        if isinstance(other, FieldElement):
            return other
        if isinstance(other, (int, Rational)):
            return FieldElement.from_rational(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        den = math.lcm(self._den, o._den)
        fa, fb = den // self._den, den // o._den
        return FieldElement._raw(tuple(a * fa + b * fb for a, b in zip(self._num, o._num)), den)

    __radd__ = __add__

    def __neg__(self):
        return FieldElement._raw(tuple(-a for a in self._num), self._den)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        out = [0] * 8
        left = [(i, a) for i, a in enumerate(self._num) if a]
        right = [(j, b) for j, b in enumerate(o._num) if b]
        for i, a in left:
            for j, b in right:
                k, f = PRODUCT[i, j]
                out[k] += f * a * b
        return FieldElement._raw(tuple(out), self._den * o._den)

    __rmul__ = __mul__

    def _conjugate(self, p: int) -> "FieldElement":
        signs = _CONJ_SIGNS[p]
        return FieldElement._raw(tuple(s * a for s, a in zip(signs, self._num)), self._den)

    def inverse(self) -> "FieldElement":
        if self.is_zero():
            raise FieldDivisionError("division by zero in Q(sqrt2, sqrt3, sqrt5)")
        # multiply by conjugates one prime at a time until the element is rational
        z = self
        acc = FieldElement.from_rational(1)
        for p in _PRIMES:
            c = z._conjugate(p)
            if c == z:
                continue
            acc = acc * c
            z = z * c
        assert z.is_rational()
        return acc * FieldElement.from_rational(1 / z.rational_part())

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out = FieldElement.from_rational(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- comparison ---------------------------------------------------------

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                return self.is_rational() and float(self) == other
            return NotImplemented
        return self._den == o._den and self._num == o._num

    def __hash__(self):
        if self._hash is None:
            if self.is_rational():
                self._hash = hash(Fraction(self._num[0], self._den))
            else:
                self._hash = hash((self._num, self._den))
        return self._hash

    def __bool__(self):
        return not self.is_zero()

    def sign(self) -> int:
        """Exact sign, by interval evaluation with increasing precision."""
        if self.is_zero():
            return 0
        if self.is_rational():
            return 1 if self._num[0] > 0 else -1
        digits = 20
        while True:
            scale = 10**digits
            lo = hi = 0
            for n, m in zip(self._num, RADICANDS):
                if not n:
                    continue
                r = math.isqrt(m * scale * scale)
                if r * r == m * scale * scale:
                    lo += n * r
                    hi += n * r
                elif n > 0:
                    lo += n * r
                    hi += n * (r + 1)
                else:
                    lo += n * (r + 1)
                    hi += n * r
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            digits *= 2

    def _cmp(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                o = FieldElement.from_rational(Fraction(other))
            else:
                return None
        return (self - o).sign()

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def floor(self) -> int:
        f = math.floor(float(self))
        # the float estimate can be off by one next to an integer
        while self < f:
            f -= 1
        while self >= f + 1:
            f += 1
        return f

    # -- conversion ---------------------------------------------------------

    def __float__(self):
        return to_float(self)

    def to_string(self) -> str:
        """Tuple serialization: eight "p/q" coordinates."""
        return "(" + ",".join(_fmt_q(c) for c in self.coeffs) + ")"

    def __str__(self):
        terms = []
        for c, label in zip(self.coeffs, BASIS_LABELS):
            if not c:
                continue
            if label == "1":
                terms.append(_fmt_q(c))
            elif c == 1:
                terms.append(label)
            elif c == -1:
                terms.append("-" + label)
            else:
                terms.append(f"{_fmt_q(c)}*{label}")
        if not terms:
            return "0"
        return "+".join(terms).replace("+-", "-")

    def __repr__(self):
        return f"FieldElement({self})"

    @classmethod
    def parse(cls, text: str) -> "FieldElement":
        """Parse either the tuple form or an expression such as ``1/2-3*sqrt6``."""
        s = text.replace(" ", "")
        if not s:
            raise ValueError("empty field element")
        if s.startswith("(") or s.startswith("["):
            parts = s.strip("()[]").split(",")
            return cls([Fraction(p.strip("\"'")) for p in parts])
        coeffs = [Fraction(0)] * 8
        pos = 0
        while pos < len(s):
            m = _TERM.match(s, pos)
            if m is None or m.end() == pos:
                raise ValueError(f"cannot parse field element {text!r}")
            pos = m.end()
            sign = -1 if m.group("sign") == "-" else 1
            coef = m.group("coef")
            rad = m.group("rad")
            c = Fraction(coef) if coef else Fraction(1)
            if rad is None:
                if not coef:
                    raise ValueError(f"cannot parse field element {text!r}")
                idx = 0
            else:
                r = int(rad)
                if r not in RADICANDS:
                    raise ValueError(f"sqrt{r} is outside Q(sqrt2, sqrt3, sqrt5)")
                idx = RADICANDS.index(r)
            coeffs[idx] += sign * c
        return cls(coeffs)


_TERM = re.compile(
    r"(?P<sign>[+-]?)(?P<coef>\d+(?:/\d+)?)?(?:\*?sqrt\(?(?P<rad>\d+)\)?)?"
)


def _fmt_q(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def field(x) -> FieldElement:
    """Coerce an int, Fraction, str or FieldElement to a FieldElement."""
    if isinstance(x, FieldElement):
        return x
    if isinstance(x, str):
        return FieldElement.parse(x)
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a Fraction or string instead")
    return FieldElement.from_rational(x)


ZERO = FieldElement()
ONE = FieldElement.from_rational(1)
SQRT2 = FieldElement.sqrt(2)
SQRT3 = FieldElement.sqrt(3)
SQRT5 = FieldElement.sqrt(5)


def field_arith(op: str, x: FieldElement, y: FieldElement) -> FieldElement:
    """Apply one of ``add``, ``sub``, ``mul``, ``div``."""
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown field operation {op!r}")


def to_float(x: FieldElement) -> float:
    if isinstance(x, (int, float, Fraction)):
        return float(x)
    if x.is_rational():
        return x._num[0] / x._den
    total = math.fsum(n * s for n, s in zip(x._num, _SQRT_FLOAT) if n)
    return total / x._den
