"""Projective geometric algebra Cl(2,0,1) over the blade basis
[1, e1, e2, e3, e12, e13, e23, e123].

This index order is the wire/file order used by every other module.
e1 and e2 square to +1, the projective generator e3 squares to 0.
"""

import numpy as np

BLADE_NAMES = ["1", "e1", "e2", "e3", "e12", "e13", "e23", "e123"]
BLADE_TUPLES = [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]
GRADES = np.array([0, 1, 1, 1, 2, 2, 2, 3])

# metric signature: e1*e1 = e2*e2 = 1, e3*e3 = 0
_METRIC = {1: 1, 2: 1, 3: 0}

# sign of (-1)^k per blade (grade involution) and (-1)^{k(k-1)/2} (reverse)
INVOLUTION_SIGNS = np.array([(-1.0) ** g for g in GRADES])
REVERSE_SIGNS = np.array([(-1.0) ** (g * (g - 1) // 2) for g in GRADES])

# slots contributing to the PGA inner product: 1, e1, e2, e12
INNER_WEIGHTS = np.array([1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0])


def _reduce_blade(generators):
    """Sort a generator word into canonical order, contracting squares.

    Returns (canonical tuple, sign); sign 0 when a degenerate square
    (e3*e3) annihilates the product.
    """
    word = list(generators)
    sign = 1
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(word) - 1:
            if word[i] == word[i + 1]:
                m = _METRIC[word[i]]
                if m == 0:
                    return (), 0
                sign *= m
                del word[i : i + 2]
                changed = True
            elif word[i] > word[i + 1]:
                word[i], word[i + 1] = word[i + 1], word[i]
                sign *= -1
                changed = True
                i += 1
            else:
                i += 1
    return tuple(word), sign


def build_structure_table():
    """8x8x8 tensor f with f[i, j, k] = coefficient of e_k in e_i * e_j.

    Generated by symbolic reduction of the blade words, never hand-typed.
    """
    index_of = {t: k for k, t in enumerate(BLADE_TUPLES)}
    f = np.zeros((8, 8, 8))
    for i, bi in enumerate(BLADE_TUPLES):
        for j, bj in enumerate(BLADE_TUPLES):
            blade, sign = _reduce_blade(bi + bj)
            if sign != 0:
                f[i, j, index_of[blade]] = sign
    return f


STRUCTURE = build_structure_table()

# left multiplication by e3 as an 8x8 matrix: (e3 * x)_k = E3_LEFT[k, b] x_b
E3_LEFT = STRUCTURE[3, :, :].T.copy()


class Multivector:
    """An element of Cl(2,0,1): 8 real coefficients in the blade order above."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        if self.coeffs.shape != (8,):
            raise ValueError("multivector needs exactly 8 coefficients")

    @classmethod
    def scalar(cls, value):
        c = np.zeros(8)
        c[0] = value
        return cls(c)

    @classmethod
    def blade(cls, index, value=1.0):
        c = np.zeros(8)
        c[index] = value
        return cls(c)

    @classmethod
    def zero(cls):
        return cls(np.zeros(8))

    def __add__(self, other):
        return Multivector(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Multivector(self.coeffs - other.coeffs)

    def __neg__(self):
        return Multivector(-self.coeffs)

    def __mul__(self, scalar):
        return Multivector(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        terms = [
            f"{c:+g}*{n}" for c, n in zip(self.coeffs, BLADE_NAMES) if c != 0.0
        ]
        return "Multivector(" + (" ".join(terms) if terms else "0") + ")"


class VersorError(ValueError):
    """Raised when an argument is not a unit versor."""


def geometric_product(x, y):
    """x * y via the precomputed structure tensor contraction."""
    return Multivector(np.einsum("i,j,ijk->k", x.coeffs, y.coeffs, STRUCTURE))


def grade_involution(x):
    """Negate odd-grade blade coefficients."""
    return Multivector(x.coeffs * INVOLUTION_SIGNS)


def reverse(x):
    """Scale grade-k blades by (-1)^{k(k-1)/2}: grades 2 and 3 flip sign."""
    return Multivector(x.coeffs * REVERSE_SIGNS)


def grade_project(x, k):
    """Keep only the grade-k part of x."""
    if k not in (0, 1, 2, 3):
        raise ValueError("grade must be 0..3")
    return Multivector(np.where(GRADES == k, x.coeffs, 0.0))


def pga_inner(x, y):
    """Invariant inner product: scalar, e1, e2 and e12 slots only."""
    return float(np.dot(x.coeffs * INNER_WEIGHTS, y.coeffs))


def _versor_parity(g):
    """0 for even versors, 1 for odd; raises on mixed-parity input."""
    even = np.any(g.coeffs[GRADES % 2 == 0] != 0.0)
    odd = np.any(g.coeffs[GRADES % 2 == 1] != 0.0)
    if even and odd:
        raise VersorError("versor has mixed parity")
    return 1 if odd else 0


def twisted_adjoint(g, x):
    """Action of the unit versor g on x.

    Realized as reverse(g) * x' * g with x' grade-involuted when g is odd;
    the reverse substitutes for the inverse, valid for unit versors only.
    For a rotor R(theta) this reproduces the counterclockwise rotation
    (cos t * x - sin t * y, sin t * x + cos t * y) on e1/e2 components.
    """
    norm = pga_inner(g, g)
    if abs(abs(norm) - 1.0) > 1e-9:
        raise VersorError(f"not a unit versor: |<g,g>| = {abs(norm)!r}")
    xi = grade_involution(x) if _versor_parity(g) else x
    return geometric_product(geometric_product(reverse(g), xi), g)


def rotor_from_angle(theta):
    """Rotor cos(theta/2) + sin(theta/2) e12 for a rotation by theta."""
    c = np.zeros(8)
    c[0] = np.cos(theta / 2.0)
    c[4] = np.sin(theta / 2.0)
    return Multivector(c)


def point(x, y):
    """Point (x, y) with unit homogeneous e12 component: e12 + x e13 + y e23."""
    c = np.zeros(8)
    c[4] = 1.0
    c[5] = x
    c[6] = y
    return Multivector(c)


_TRANSLATOR_BASIS = None


def _find_translator_basis():
    """Pick the e13/e23 signs so that the translator moves points by (tx, ty).

    The candidate form is 1 + (tx*A + ty*B)/2 with A, B in {+-e13, +-e23};
    the correct pair is fixed by brute force against the point embedding.
    """
    probes = [(0.0, 0.0, 0.3, -0.7), (1.5, -2.0, 0.4, 1.1), (-0.2, 0.8, -1.3, 0.5)]
    for ai in (5, 6):
        for asign in (1.0, -1.0):
            bi = 11 - ai  # the other of e13/e23
            for bsign in (1.0, -1.0):
                ok = True
                for (x, y, tx, ty) in probes:
                    c = np.zeros(8)
                    c[0] = 1.0
                    c[ai] += 0.5 * asign * tx
                    c[bi] += 0.5 * bsign * ty
                    moved = twisted_adjoint(Multivector(c), point(x, y))
                    want = point(x + tx, y + ty)
                    if not np.allclose(moved.coeffs, want.coeffs, atol=1e-12):
                        ok = False
                        break
                if ok:
                    return (ai, asign, bi, bsign)
    raise RuntimeError("no translator sign convention satisfies the point action")


def translator_from_offsets(tx, ty):
    """Unit translator whose twisted adjoint moves points by (tx, ty)."""
    global _TRANSLATOR_BASIS
    if _TRANSLATOR_BASIS is None:
        _TRANSLATOR_BASIS = _find_translator_basis()
    ai, asign, bi, bsign = _TRANSLATOR_BASIS
    c = np.zeros(8)
    c[0] = 1.0
    c[ai] += 0.5 * asign * tx
    c[bi] += 0.5 * bsign * ty
    return Multivector(c)


def reflector_from_line(a, b, c=0.0):
    """Unit grade-1 versor a e1 + b e2 + c e3 (a^2 + b^2 normalized to 1)."""
    n = np.hypot(a, b)
    if n == 0.0:
        raise VersorError("reflection normal must have nonzero e1/e2 part")
    out = np.zeros(8)
    out[1] = a / n
    out[2] = b / n
    out[3] = c
    return Multivector(out)


def random_versor(rng, kinds=("rotor", "translator", "reflection")):
    """Random unit versor: a product of 1..3 random factors of the given kinds."""
    g = Multivector.scalar(1.0)
    for _ in range(rng.integers(1, 4)):
        kind = kinds[rng.integers(0, len(kinds))]
        if kind == "rotor":
            factor = rotor_from_angle(rng.uniform(-np.pi, np.pi))
        elif kind == "translator":
            factor = translator_from_offsets(rng.uniform(-2, 2), rng.uniform(-2, 2))
        else:
            phi = rng.uniform(0, 2 * np.pi)
            factor = reflector_from_line(np.cos(phi), np.sin(phi), rng.uniform(-1, 1))
        g = geometric_product(g, factor)
    return g


def random_multivector(rng, scale=1.0):
    return Multivector(rng.normal(0.0, scale, size=8))


def adjoint_matrix(g):
    """8x8 matrix M with twisted_adjoint(g, x) == M @ x.coeffs for all x."""
    m = np.empty((8, 8))
    for b in range(8):
        m[:, b] = twisted_adjoint(g, Multivector.blade(b)).coeffs
    return m
