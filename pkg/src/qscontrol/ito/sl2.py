"""sl(2) ladder representation and the combinatorics behind the SWN table.

The number-space representation acts on the basis e_0, e_1, ... of l2(N) by

    rho+(Bplus^n M^k Bminus^l) e_m = theta(n, k, l, m) e_{n+m-l}

with weight

    theta(n,k,l,m) = H(n+m-l) * sqrt((m-l+n+1)/(m+1)) * 2^k
                     * rising(m-l+1, n) * falling(m+1, l) * (m-l+1)^k

(H the Heaviside step, H(x)=1 for x>=0).  Everything except the square
root is exact integer arithmetic; the square root is evaluated once per
weight, in double precision.

The conservation-differential products close with integer structure
constants built from binomials, signed Stirling numbers of the first kind
and factorial powers; ``swn_structure_constants`` returns them exactly.
The sign convention of the Stirling numbers was frozen after checking
both candidates against the representation-composition oracle (matrix
products of rho+ images); the signed convention is the one that
reproduces compositions, see tests/test_swn_table.py.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def stirling1(n, k):
    """Signed Stirling number of the first kind s(n, k).

    Defined by falling(x, n) = sum_k s(n, k) x^k, equivalently by the
    recurrence s(n+1, k) = s(n, k-1) - n*s(n, k) with s(0, 0) = 1.
    Out-of-range k (k < 0 or k > n) gives 0.
    """
    if k < 0 or k > n:
        return 0
    if n == 0:
        return 1
    return stirling1(n - 1, k - 1) - (n - 1) * stirling1(n - 1, k)


@lru_cache(maxsize=None)
def stirling1_unsigned(n, k):
    """|s(n, k)|; the rejected candidate for the table (kept for tests)."""
    return abs(stirling1(n, k))


def falling(x, n):
    """x(x-1)...(x-n+1), 1 for n = 0.  Exact for integer x."""
    out = 1
    for j in range(n):
        out *= x - j
    return out


def rising(x, n):
    """x(x+1)...(x+n-1), 1 for n = 0."""
    out = 1
    for j in range(n):
        out *= x + j
    return out


def factorial_powers(x, n):
    """Pair (falling, rising) factorial powers of x of order n."""
    if n < 0:
        raise ValueError("factorial power order must be a natural number")
    return falling(x, n), rising(x, n)


def int_pow(base, exp):
    """base^exp with the 0^0 = 1 convention used by the table."""
    if exp == 0:
        return 1
    return base**exp


def theta(n, k, l, m):
    """Representation weight theta_{n,k,l,m}; 0 outside the Heaviside support."""
    if min(n, k, l, m) < 0:
        raise ValueError("theta indices must be naturals")
    if n + m - l < 0:
        return 0.0
    integer_part = (2**k) * rising(m - l + 1, n) * falling(m + 1, l) * int_pow(m - l + 1, k)
    if integer_part == 0:
        return 0.0
    ratio = Fraction(m - l + n + 1, m + 1)
    return float(integer_part) * math.sqrt(ratio.numerator / ratio.denominator)


def theta_int(n, k, l, m):
    """Exact integer factor of theta: theta = theta_int * sqrt((n+m-l+1)/(m+1)).

    Splitting off the square root makes representation-composition checks
    exact: the entry of any rho+ image (or product of images) at position
    (row, col) carries the common factor sqrt((row+1)/(col+1)), so two such
    matrices are equal iff their integer parts agree.
    """
    if n + m - l < 0:
        return 0
    return (2**k) * rising(m - l + 1, n) * falling(m + 1, l) * int_pow(m - l + 1, k)


def rho_plus_int_entries(n, k, l, N):
    """Sparse {(row, col): integer part} of the N-truncated rho+ image."""
    out = {}
    for m in range(N):
        row = n + m - l
        if 0 <= row < N:
            val = theta_int(n, k, l, m)
            if val:
                out[(row, m)] = val
    return out


def rho_plus_matrix(n, k, l, N):
    """N x N truncation of rho+(Bplus^n M^k Bminus^l) on e_0..e_{N-1}."""
    if N < 1:
        raise ValueError("truncation size must be >= 1")
    mat = np.zeros((N, N))
    for m in range(N):
        row = n + m - l
        if 0 <= row < N:
            mat[row, m] = theta(n, k, l, m)
    return mat


def swn_structure_constants(alpha, beta, gamma, a, b, c, stirling=stirling1):
    """Exact structure constants of dL_{alpha,beta,gamma} * dL_{a,b,c}.

    Returns a dict mapping output labels (n', k', l') to integer
    coefficients:

        dL_{alpha,beta,gamma} dL_{a,b,c}
            = sum  coeff * dL_{a+alpha-gamma+lam, omg+sig+eps, lam+c}

    where the five-fold sum runs over lam <= gamma, rho <= gamma-lam,
    sig <= gamma-lam-rho, omg <= beta, eps <= b and

        coeff = C(gamma,lam) C(gamma-lam,rho) C(beta,omg) C(b,eps)
                * 2^(beta+b-omg-eps) * S(gamma-lam-rho, sig)
                * falling(a, gamma-lam) * falling(a+lam-1, rho)
                * (a-gamma+lam)^(beta-omg) * lam^(b-eps).

    ``stirling`` is injectable so the sign-convention check can evaluate
    the rejected unsigned candidate.
    """
    out = {}
    for lam in range(gamma + 1):
        for rho in range(gamma - lam + 1):
            for sig in range(gamma - lam - rho + 1):
                s_factor = stirling(gamma - lam - rho, sig)
                if s_factor == 0:
                    continue
                base = (
                    math.comb(gamma, lam)
                    * math.comb(gamma - lam, rho)
                    * s_factor
                    * falling(a, gamma - lam)
                    * falling(a + lam - 1, rho)
                )
                if base == 0:
                    continue
                for omg in range(beta + 1):
                    mid = (
                        base
                        * math.comb(beta, omg)
                        * int_pow(2, beta - omg)
                        * int_pow(a - gamma + lam, beta - omg)
                    )
                    if mid == 0:
                        continue
                    for eps in range(b + 1):
                        coeff = (
                            mid
                            * math.comb(b, eps)
                            * int_pow(2, b - eps)
                            * int_pow(lam, b - eps)
                        )
                        if coeff == 0:
                            continue
                        label = (a + alpha - gamma + lam, omg + sig + eps, lam + c)
                        out[label] = out.get(label, 0) + coeff
    return {label: coeff for label, coeff in out.items() if coeff != 0}
