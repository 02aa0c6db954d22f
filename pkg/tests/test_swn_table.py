"""SWN Ito table against the number-space representation oracle.

The oracle (O1): conservation differentials multiply like their rho+
images compose, so for every pair of labels the table's output combination
must reproduce the matrix product of the truncated images.  Both sides of
an entry carry the common factor sqrt((row+1)/(col+1)); stripping it makes
the comparison exact integer arithmetic, so the check runs at zero
tolerance (well inside the 1e-8 budget) on the safe window.

The comparison is also what froze the sign convention of the Stirling
numbers: the signed convention passes on every index pair <= 2 while the
unsigned one fails (witness pair below), so the signed convention is the
one wired into the table.
"""

import itertools

import numpy as np

from qscontrol.ito import (
    SwnLabel,
    SymbolicDifferential,
    d_bminus,
    d_bplus,
    d_m,
    rho_plus_matrix,
    swn_mul,
    swn_structure_constants,
    theta,
)
from qscontrol.ito.sl2 import rho_plus_int_entries, stirling1_unsigned

N_ORACLE = 30
MARGIN = 5  # >= max total raising index for index pairs <= 2


def _compose_int(x, y, N):
    """Integer parts of rho+(x) @ rho+(y) on an N-truncation."""
    left = rho_plus_int_entries(*x, N)
    right = rho_plus_int_entries(*y, N)
    out = {}
    for (j, c), vr in right.items():
        for (r, j2), vl in left.items():
            if j2 == j:
                out[(r, c)] = out.get((r, c), 0) + vl * vr
    return {k: v for k, v in out.items() if v}


def _table_int(x, y, N, stirling=None):
    kwargs = {} if stirling is None else {"stirling": stirling}
    out = {}
    for label, coeff in swn_structure_constants(*x, *y, **kwargs).items():
        for pos, val in rho_plus_int_entries(*label, N).items():
            out[pos] = out.get(pos, 0) + coeff * val
    return {k: v for k, v in out.items() if v}


def _window_mismatch(a, b, N, margin):
    """Largest |difference| of two sparse integer matrices on safe columns."""
    worst = 0
    for pos in set(a) | set(b):
        if pos[1] <= N - 1 - margin:
            worst = max(worst, abs(a.get(pos, 0) - b.get(pos, 0)))
    return worst


ALL_CONS_PAIRS = list(
    itertools.product(itertools.product(range(3), repeat=3), repeat=2)
)


def test_oracle_o1_exact_on_all_cons_pairs_up_to_2():
    for x, y in ALL_CONS_PAIRS:
        direct = _compose_int(x, y, N_ORACLE)
        table = _table_int(x, y, N_ORACLE)
        assert _window_mismatch(direct, table, N_ORACLE, MARGIN) == 0, (x, y)


def test_unsigned_stirling_convention_is_rejected_by_oracle():
    # Witness: the (0,0,2)*(2,0,0) product needs s(2,1) = -1, not +1.
    x, y = (0, 0, 2), (2, 0, 0)
    direct = _compose_int(x, y, N_ORACLE)
    signed = _table_int(x, y, N_ORACLE)
    unsigned = _table_int(x, y, N_ORACLE, stirling=stirling1_unsigned)
    assert _window_mismatch(direct, signed, N_ORACLE, MARGIN) == 0
    assert _window_mismatch(direct, unsigned, N_ORACLE, MARGIN) > 0


def test_oracle_o1_float_route_within_scaled_tolerance():
    # Same comparison in double precision; entries reach ~1e8 at N = 30 so
    # the tolerance is relative to the window magnitude.
    rng_labels = [(0, 0, 0), (1, 0, 0), (0, 1, 2), (2, 2, 1), (2, 0, 2)]
    cache = {}

    def rho(label):
        if label not in cache:
            cache[label] = rho_plus_matrix(*label, N_ORACLE)
        return cache[label]

    for x in rng_labels:
        for y in rng_labels:
            direct = rho(x) @ rho(y)
            table = np.zeros_like(direct)
            for label, coeff in swn_structure_constants(*x, *y).items():
                table += coeff * rho(label)
            win = np.s_[:, : N_ORACLE - MARGIN]
            scale = max(1.0, np.max(np.abs(direct[win])))
            assert np.max(np.abs((direct - table)[win])) <= 1e-8 * scale


# ----------------------------------------------------------- basis products


def test_ann_cre_gives_delta_dt():
    for m in range(3):
        for n in range(3):
            got = swn_mul(
                SymbolicDifferential.basis(SwnLabel.ann(m)),
                SymbolicDifferential.basis(SwnLabel.cre(n)),
            )
            if m == n:
                assert got == SymbolicDifferential.basis(SwnLabel.time())
            else:
                assert got.is_zero()


def test_cons_cre_shifts_mode_with_theta_weight():
    for alpha, beta, gamma in itertools.product(range(3), repeat=3):
        for n in range(3):
            got = swn_mul(
                SymbolicDifferential.basis(SwnLabel.cons(alpha, beta, gamma)),
                SymbolicDifferential.basis(SwnLabel.cre(n)),
            )
            weight = theta(alpha, beta, gamma, n)
            if weight == 0.0:
                assert got.is_zero()
            else:
                want = SymbolicDifferential.basis(
                    SwnLabel.cre(alpha + n - gamma), weight
                )
                assert got == want


def test_cre_annihilates_from_left_and_time_from_both_sides():
    labels = [SwnLabel.time(), SwnLabel.ann(0), SwnLabel.cre(1), SwnLabel.cons(1, 0, 1)]
    for lab in labels:
        d = SymbolicDifferential.basis(lab)
        assert swn_mul(SymbolicDifferential.basis(SwnLabel.cre(0)), d).is_zero()
        assert swn_mul(SymbolicDifferential.basis(SwnLabel.time()), d).is_zero()
        assert swn_mul(d, SymbolicDifferential.basis(SwnLabel.time())).is_zero()


def test_ito_bracket_of_sl2_differentials_is_dm():
    bracket = swn_mul(d_bminus(), d_bplus()) - swn_mul(d_bplus(), d_bminus())
    assert bracket == d_m()


# -------------------------------------------------------------- *-algebra


def _basis_labels(max_idx):
    labels = [SwnLabel.time()]
    labels += [SwnLabel.ann(m) for m in range(max_idx + 1)]
    labels += [SwnLabel.cre(m) for m in range(max_idx + 1)]
    labels += [
        SwnLabel.cons(n, k, l)
        for n, k, l in itertools.product(range(max_idx + 1), repeat=3)
    ]
    return labels


def test_adjoint_antihomomorphism_on_pairs_up_to_2():
    labels = _basis_labels(2)
    for la, lb in itertools.product(labels, repeat=2):
        a = SymbolicDifferential.basis(la, 0.3 + 0.7j)
        b = SymbolicDifferential.basis(lb, -1.1 + 0.2j)
        lhs = swn_mul(a, b).adjoint()
        rhs = swn_mul(b.adjoint(), a.adjoint())
        assert lhs.max_coeff_diff(rhs) <= 1e-12 * _scale(lhs, rhs)


def test_associativity_on_triples_up_to_1():
    labels = _basis_labels(1)
    for la, lb, lc in itertools.product(labels, repeat=3):
        a = SymbolicDifferential.basis(la)
        b = SymbolicDifferential.basis(lb)
        c = SymbolicDifferential.basis(lc)
        lhs = swn_mul(swn_mul(a, b), c)
        rhs = swn_mul(a, swn_mul(b, c))
        assert lhs.max_coeff_diff(rhs) <= 1e-12 * _scale(lhs, rhs)


def _scale(*diffs):
    mags = [abs(c) for d in diffs for c in d.terms.values()]
    return max(1.0, max(mags, default=0.0))
