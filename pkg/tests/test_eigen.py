from fractions import Fraction

import numpy as np
import pytest

from certctrl.core import ArgumentError
from certctrl.eigen import (
    ApproxEigenPair,
    approx_eigenpairs,
    approx_roots,
    char_poly,
    hurwitz_verdict,
    residual_recheck_mp,
)

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# exact-oracle characteristic polynomial (Fraction Laplace expansion,
# independent of the Faddeev-LeVerrier path under test)
# ---------------------------------------------------------------------------

def _poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_add(p, q):
    n = max(len(p), len(q))
    p = [Fraction(0)] * (n - len(p)) + list(p)
    q = [Fraction(0)] * (n - len(q)) + list(q)
    return [a + b for a, b in zip(p, q)]


def _poly_scale(p, s):
    return [s * a for a in p]


def _char_poly_fraction(A):
    """det(lambda I - A) by Laplace expansion over Fraction[lambda]."""
    n = len(A)
    M = [
        [
            [Fraction(1), -Fraction(A[i][j])] if i == j else [Fraction(0), -Fraction(A[i][j])]
            for j in range(n)
        ]
        for i in range(n)
    ]

    def det(rows, cols):
        if len(cols) == 1:
            return M[rows[0]][cols[0]]
        total = [Fraction(0)]
        for k, c in enumerate(cols):
            minor = det(rows[1:], cols[:k] + cols[k + 1 :])
            term = _poly_mul(M[rows[0]][c], minor)
            if k % 2 == 1:
                term = _poly_scale(term, Fraction(-1))
            total = _poly_add(total, term)
        return total

    return det(list(range(n)), list(range(n)))


def test_char_poly_diagonal():
    coeffs, radii = char_poly(np.diag([-1.0, -2.0]))
    assert np.allclose(coeffs, [1.0, 3.0, 2.0], atol=1e-14)
    assert np.all(radii < 1e-12)


def test_char_poly_rotation():
    coeffs, _ = char_poly(ROT)
    assert np.allclose(coeffs, [1.0, 0.0, 1.0], atol=1e-14)


def test_char_poly_random_vs_fraction_oracle():
    rng = np.random.default_rng(77)
    for _ in range(25):
        A = np.round(rng.uniform(-2, 2, (3, 3)) * 64) / 64  # dyadic entries
        coeffs, radii = char_poly(A)
        exact = _char_poly_fraction(A.tolist())
        for c, e, r in zip(coeffs, exact, radii):
            # DERIVED oracle: exact cofactor expansion
            assert abs(complex(c) - complex(e)) <= max(r, 1e-10)


# ---------------------------------------------------------------------------
# roots
# ---------------------------------------------------------------------------

def test_roots_plus_minus_i():
    clusters = approx_roots(np.array([1.0, 0.0, 1.0]), 1e-10)
    centers = sorted((c.center for c in clusters), key=lambda z: z.imag)
    assert abs(centers[0] + 1j) <= 1e-10
    assert abs(centers[1] - 1j) <= 1e-10


def test_roots_simple_real_pair():
    clusters = approx_roots(np.array([1.0, 3.0, 2.0]), 1e-10)
    centers = sorted(c.center.real for c in clusters)
    assert abs(centers[0] + 2.0) <= 1e-9
    assert abs(centers[1] + 1.0) <= 1e-9


def test_roots_triple_root_cluster_radius_honest():
    # (lambda + 1)^3: the cluster radius must stay at the cube-root of
    # machine-scale coefficient noise, never at machine epsilon itself
    clusters = approx_roots(np.array([1.0, 3.0, 3.0, 1.0]), 1e-3)
    big = max(clusters, key=lambda c: c.multiplicity)
    assert abs(big.center + 1.0) <= 1e-3
    assert sum(c.multiplicity for c in clusters) == 3
    assert big.radius >= 1e-8  # >= machine-scale cube-root inflation
    # DERIVED: perturbing the coefficients by 1e-12 spreads the roots to
    # about (1e-12)^(1/3) = 1e-4, confirming the ill-conditioning the
    # radius must reflect
    pert = approx_roots(np.array([1.0, 3.0, 3.0, 1.0 + 1e-12]), 1e-3)
    all_roots = [w for c in pert for w in (c.members if c.members else (c.center,))]
    spread = max(abs(w + 1.0) for w in all_roots)
    assert 1e-6 <= spread <= 1e-2


def test_roots_coefficient_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        roots = rng.uniform(-2, 2, n) + 1j * rng.uniform(-2, 2, n)
        coeffs = np.poly(roots)
        clusters = approx_roots(coeffs, 1e-8)
        got = []
        for c in clusters:
            got.extend([c.center] * c.multiplicity)
        back = np.poly(np.array(got))
        scale = np.abs(coeffs).max()
        assert np.abs(back - coeffs).max() <= n * 1e-7 * scale


def test_roots_rejects_degenerate_input():
    with pytest.raises(ArgumentError):
        approx_roots(np.array([1.0]), 1e-6)
    with pytest.raises(ArgumentError):
        approx_roots(np.array([1.0, 2.0]), 0.0)


# ---------------------------------------------------------------------------
# eigenpairs
# ---------------------------------------------------------------------------

def test_eigenpairs_diagonal_exact():
    pairs, achieved = approx_eigenpairs(np.diag([-1.0, -2.0]), 1e-13)
    assert achieved and len(pairs) == 2
    lams = sorted(p.lambda_hat.real for p in pairs)
    assert abs(lams[0] + 2.0) <= 1e-12
    assert abs(lams[1] + 1.0) <= 1e-12
    for p in pairs:
        assert p.residual.value <= 1e-13


def test_eigenpairs_rotation_closed_form():
    pairs, achieved = approx_eigenpairs(ROT, 1e-8)
    assert achieved and len(pairs) == 2
    for p in pairs:
        assert abs(abs(p.lambda_hat.imag) - 1.0) <= 1e-8
        assert abs(p.lambda_hat.real) <= 1e-8
        # DERIVED: closed-form check of A v - lambda v
        r = ROT @ p.v_hat - p.lambda_hat * p.v_hat
        assert np.linalg.norm(r) <= 1e-8
        # eigenvector matches (1, -i)/sqrt(2) or (1, i)/sqrt(2) up to phase
        ref = np.array([1.0, -1j * np.sign(p.lambda_hat.imag)]) / np.sqrt(2)
        overlap = abs(np.vdot(ref, p.v_hat))
        assert overlap >= 1.0 - 1e-8


def test_eigenpairs_jordan_block_reports_single_direction():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    pairs, achieved = approx_eigenpairs(A, 1e-3)
    # defective: only one independent direction passes the Gram threshold
    assert len(pairs) == 1
    assert pairs[0].residual.value <= 1e-3
    assert abs(pairs[0].v_hat[0]) >= 0.99  # direction e1


def test_eigenpairs_gram_independence():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        pairs, _ = approx_eigenpairs(A, 1e-8)
        assert 1 <= len(pairs) <= n
        V = np.array([p.v_hat for p in pairs])
        G = V.conj() @ V.T
        assert float(np.linalg.eigvalsh(G).min()) >= 1e-6 - 1e-12


def test_eigenpairs_residual_sound_vs_mp():
    rng = np.random.default_rng(19)
    for _ in range(40):
        n = int(rng.integers(2, 9))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        pairs, achieved = approx_eigenpairs(A, 1e-8)
        assert achieved
        for p in pairs:
            hi = residual_recheck_mp(A, p)
            assert hi <= p.residual.value + p.residual.radius


# ---------------------------------------------------------------------------
# Hurwitz verdict
# ---------------------------------------------------------------------------

def test_hurwitz_stable_diagonal():
    v = hurwitz_verdict(np.diag([-1.0, -2.0]), 1e-8)
    assert v.verdict == "stable"
    assert v.margin.value + v.margin.radius < 0


def test_hurwitz_rotation_undecided():
    v = hurwitz_verdict(ROT, 1e-8)
    assert v.verdict == "undecided"


def test_hurwitz_companion_unstable():
    # companion of lambda^2 - 0.1 lambda + 1: roots 0.05 +- ~0.9987i
    A = np.array([[0.0, -1.0], [1.0, 0.1]])
    v = hurwitz_verdict(A, 1e-8)
    assert v.verdict == "unstable"
    assert v.margin.value == pytest.approx(0.05, abs=1e-6)


def test_hurwitz_agrees_with_2x2_closed_form():
    # Routh-Hurwitz oracle for real 2x2: stable iff tr < 0 and det > 0
    rng = np.random.default_rng(29)
    checked = 0
    for _ in range(200):
        A = rng.uniform(-2, 2, (2, 2))
        v = hurwitz_verdict(A, 1e-9)
        if v.verdict == "undecided":
            continue
        tr, det = np.trace(A), np.linalg.det(A)
        oracle = "stable" if (tr < 0 and det > 0) else "unstable"
        assert v.verdict == oracle
        checked += 1
    assert checked >= 150


def test_hurwitz_similarity_invariance():
    rng = np.random.default_rng(41)
    agreements = 0
    for _ in range(20):
        n = 3
        A = rng.standard_normal((n, n))
        S = np.eye(n) + 0.2 * rng.standard_normal((n, n))
        B = S @ A @ np.linalg.inv(S)
        va, vb = hurwitz_verdict(A, 1e-8), hurwitz_verdict(B, 1e-8)
        if "undecided" in (va.verdict, vb.verdict):
            continue
        assert va.verdict == vb.verdict
        agreements += 1
    assert agreements >= 10


def test_eigenpairs_failure_flag_below_attainable_precision():
    # eps far below attainable double precision: best pairs returned with
    # the achieved flag cleared
    rng = np.random.default_rng(8)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    pairs, achieved = approx_eigenpairs(A, 1e-30)
    assert not achieved
    assert pairs  # best-effort pairs still reported


def test_hurwitz_margin_invariants_random():
    rng = np.random.default_rng(53)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n))
        v = hurwitz_verdict(A, 1e-9)
        if v.verdict == "stable":
            assert v.margin.value + v.margin.radius < 0
        elif v.verdict == "unstable":
            assert v.margin.value - v.margin.radius > 0
