"""Holomorphic gauge normalization of upper-triangular-plus-subdiagonal Higgs fields.

Matrices hold polynomials in z; with rational (Gaussian) coefficients the
arithmetic is exact.  The companion target has unit subdiagonal and q_j
constant along superdiagonal j - 1.
"""

from fractions import Fraction

import numpy as np
import sympy
from sympy.polys.domains import QQ, QQ_I
from sympy.polys.matrices import DomainMatrix

Z = sympy.Symbol("z")
DOMAIN = QQ_I[Z]


def _ground(a):
    """Exact Gaussian rational from a number, a Fraction or an [re, im] pair."""
    if isinstance(a, (list, tuple)) and len(a) == 2:
        re, im = a
    elif isinstance(a, complex):
        re, im = a.real, a.imag
    else:
        re, im = a, 0
    return QQ_I(QQ.convert(_rational(re)), QQ.convert(_rational(im)))


def _rational(x):
    if isinstance(x, Fraction):
        return sympy.Rational(x.numerator, x.denominator)
    if isinstance(x, float):
        return sympy.nsimplify(x)
    return sympy.Rational(x)


def _entry(x):
    """A list is a coefficient list (each coefficient a number or an [re, im] pair)."""
    if isinstance(x, (list, tuple)):
        coeffs = [_ground(a) for a in x]
        return DOMAIN.ring.from_list(coeffs[::-1]) if coeffs else DOMAIN.zero
    if isinstance(x, sympy.Basic):
        return DOMAIN.from_sympy(sympy.expand(x))
    return DOMAIN.ring.ground_new(_ground(x))


def as_domain_matrix(theta):
    """DomainMatrix over Q(i)[z]; entries are coefficient lists (lowest degree first),
    numbers or sympy expressions in z."""
    if isinstance(theta, DomainMatrix):
        return theta
    rows = [[_entry(x) for x in row] for row in theta]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("theta must be square")
    return DomainMatrix(rows, (n, n), DOMAIN)


def to_sympy(M):
    return M.to_Matrix().applyfunc(sympy.expand)


def _entries(T):
    return T.to_list()


def _from_entries(rows):
    n = len(rows)
    return DomainMatrix(rows, (n, n), DOMAIN)


def _constant(p):
    """Ground coefficient of a constant polynomial, or None if p depends on z."""
    if p.degree() > 0:
        return None
    return DOMAIN.ring.domain.convert(p.coeff(1)) if p else DOMAIN.ring.domain.zero


def check_shape(T):
    """Upper triangular plus constant nonzero subdiagonal, trace zero."""
    n = T.shape[0]
    E = _entries(T)
    for i in range(n):
        for j in range(n):
            if i > j + 1 and E[i][j]:
                raise ValueError(f"entry ({i + 1},{j + 1}) below the subdiagonal must vanish")
    for k in range(n - 1):
        c = _constant(E[k + 1][k])
        if c is None:
            raise ValueError(f"subdiagonal entry {k + 1} must be constant")
        if not c:
            raise ValueError(f"subdiagonal entry {k + 1} must be nonzero")
    if sum((E[i][i] for i in range(n)), DOMAIN.zero):
        raise ValueError("theta must be trace-free")
    return E


def rescale_subdiagonal(theta):
    """Conjugate by g = diag(d), d_1 = 1, d_{k+1} = d_k / r_k to make the subdiagonal 1."""
    T = theta if isinstance(theta, DomainMatrix) else as_domain_matrix(theta)
    E = check_shape(T)
    n = T.shape[0]
    K = DOMAIN.ring.domain
    d = [K.one]
    for k in range(n - 1):
        d.append(K.quo(d[-1], _constant(E[k + 1][k])))
    z0 = DOMAIN.zero
    g = _from_entries([[DOMAIN.convert_from(d[i], K) if i == j else z0 for j in range(n)] for i in range(n)])
    gi = _from_entries([[DOMAIN.convert_from(K.quo(K.one, d[i]), K) if i == j else z0 for j in range(n)]
                        for i in range(n)])
    out = g * T * gi
    Eo = _entries(out)
    assert all(Eo[k + 1][k] == DOMAIN.one for k in range(n - 1)), "rescaling failed"
    return out, g


def _unipotent_inverse(F, n):
    """(I + F)^{-1} for strictly upper triangular F as a finite Neumann series."""
    I = DomainMatrix.eye(n, DOMAIN)
    out = I
    term = I
    negF = -F
    for _ in range(n - 1):
        term = term * negF
        out = out + term
    return out


def normalize_to_companion(theta):
    """Gauge transformation g with g theta g^{-1} = theta(q).

    Stage d = 0..n-2 reads q_{d+1} as the mean of superdiagonal d of the
    current matrix and conjugates by I + F with F on superdiagonal d + 1,
    F_{i,i+d+1} = sum_{l<=i} (q_{d+1} - theta_{l,l+d}).  The corner entry
    left at the end is q_n.  Returns a dict with ``q`` (sympy polynomials
    for j = 2..n), ``g`` and the transformed matrix.
    """
    T, g = rescale_subdiagonal(theta)
    n = T.shape[0]
    K = DOMAIN.ring.domain
    q = {}
    for d in range(n - 1):
        E = _entries(T)
        diag = [E[i][i + d] for i in range(n - d)]
        qd = sum(diag, DOMAIN.zero) * K.quo(K.one, K.convert(n - d))
        if d == 0:
            assert not qd, "trace must vanish"
        else:
            q[d + 1] = qd
        rows = [[DOMAIN.zero] * n for _ in range(n)]
        acc = DOMAIN.zero
        for i in range(n - d - 1):
            acc = acc + qd - diag[i]
            rows[i][i + d + 1] = acc
        F = _from_entries(rows)
        G = DomainMatrix.eye(n, DOMAIN) + F
        T = G * T * _unipotent_inverse(F, n)
        g = G * g
        En = _entries(T)
        for i in range(n - d):
            if En[i][i + d] != qd:
                raise ArithmeticError(f"stage {d} failed to make superdiagonal {d} constant")
    if n >= 2:
        q[n] = _entries(T)[0][n - 1]
    if T != companion_matrix(q, n):
        raise ArithmeticError("gauge-transformed field is not in companion form")
    return {"q": q, "g": g, "theta": T, "n": n}


def companion_matrix(q, n):
    rows = [[DOMAIN.zero] * n for _ in range(n)]
    for k in range(n - 1):
        rows[k + 1][k] = DOMAIN.one
    for j, v in q.items():
        if not hasattr(v, "ring"):
            v = _entry(v)
        for i in range(n - j + 1):
            rows[i][i + j - 1] = v
    return _from_entries(rows)


def charpoly_equal(theta, q):
    """Exact comparison of char(theta) with char(theta(q)) over Q(i)[z]."""
    T = theta if isinstance(theta, DomainMatrix) else as_domain_matrix(theta)
    n = T.shape[0]
    C = companion_matrix(q, n)
    return T.charpoly() == C.charpoly()


def _complex(c):
    return complex(float(c.x), float(c.y))


def poly_coefficients(p):
    """Complex coefficient list, lowest degree first, of a Q(i)[z] element."""
    if not p:
        return [0j]
    return [_complex(c) for c in p.to_dense()[::-1]]


def q_coefficients(q):
    """q_j as complex coefficient lists, lowest degree first."""
    return {j: poly_coefficients(v) for j, v in q.items()}


def matrix_coefficients(M):
    return [[poly_coefficients(p) for p in row] for row in M.to_list()]


def to_expr(p):
    return DOMAIN.to_sympy(p)


def random_instance(rng, n, max_degree=2, max_num=5):
    """Random exact-rational upper-triangular-plus-subdiagonal field with trace zero."""

    def rat():
        a = Fraction(int(rng.integers(-max_num, max_num + 1)), int(rng.integers(1, max_num + 1)))
        b = Fraction(int(rng.integers(-max_num, max_num + 1)), int(rng.integers(1, max_num + 1)))
        return [a, b]

    def poly():
        deg = int(rng.integers(0, max_degree + 1))
        return [rat() for _ in range(deg + 1)]

    theta = [[[[Fraction(0), Fraction(0)]] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            theta[i][j] = poly()
    for k in range(n - 1):
        while True:
            r = rat()
            if r[0] != 0 or r[1] != 0:
                break
        theta[k + 1][k] = [r]
    # trace zero: last diagonal entry balances the others
    deg = max(len(theta[i][i]) for i in range(n - 1))
    last = []
    for k in range(deg):
        re = -sum((theta[i][i][k][0] for i in range(n - 1) if k < len(theta[i][i])), Fraction(0))
        im = -sum((theta[i][i][k][1] for i in range(n - 1) if k < len(theta[i][i])), Fraction(0))
        last.append([re, im])
    theta[n - 1][n - 1] = last
    return theta


def evaluate(M, z):
    f = sympy.lambdify(Z, M, "numpy")
    return np.asarray(f(z), dtype=complex)
