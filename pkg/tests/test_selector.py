import math
from fractions import Fraction

import numpy as np
import pytest

from certctrl.core import ArgumentError, ContractError, Modulus
from certctrl.selector import (
    Block,
    Chunk,
    GeneralizedBlock,
    RegularSVF,
    countable_reduction,
    extract_selector,
    refine_selector,
    simple_approx,
    volume,
)

F12 = Fraction(1, 2)


def const_chunk(lo, hi, eval_radius=0.0):
    return Chunk(
        alpha=lambda x, v=float(lo): v,
        beta=lambda x, v=float(hi): v,
        modulus=Modulus.lipschitz(0.0),
        eval_radius=eval_radius,
    )


def linear_chunk():
    # [0, x] on the current block
    return Chunk(
        alpha=lambda x: 0.0,
        beta=lambda x: float(np.atleast_1d(x)[0]),
        modulus=Modulus.lipschitz(1.0),
        eval_radius=0.0,
    )


def identity_chunk():
    return Chunk(
        alpha=lambda x: float(np.atleast_1d(x)[0]),
        beta=lambda x: float(np.atleast_1d(x)[0]),
        modulus=Modulus.lipschitz(1.0),
        eval_radius=0.0,
    )


# ---------------------------------------------------------------------------
# blocks and volume
# ---------------------------------------------------------------------------

def test_volume_two_disjoint_unit_intervals():
    gb = GeneralizedBlock.of(Block.interval(0, 1), Block.interval(2, 3))
    v = volume(gb)
    assert v.value == 2.0 and v.radius == 0.0


def test_volume_empty_block_is_zero():
    gb = GeneralizedBlock.of(Block.interval(1, 0))
    assert volume(gb).value == 0.0


def test_volume_dyadic_sum_exact():
    gb = GeneralizedBlock.of(
        Block.make((0, F12)),
        Block.make((1, 1 + Fraction(1, 4))),
        Block.make((2, 2 + Fraction(1, 8))),
    )
    v = volume(gb)
    assert v.value == 7.0 / 8.0 and v.radius == 0.0
    assert gb.volume_exact() == Fraction(7, 8)


def test_volume_nonproper_infinite_rejected():
    gb = GeneralizedBlock((Block.interval(0, 1),), infinite=True)
    with pytest.raises(ContractError):
        volume(gb)


def test_block_subtract_carves_exactly():
    a = Block.make((0, 2), (0, 2))
    b = Block.make((1, 3), (1, 3))
    pieces = a.subtract(b)
    total = sum(p.volume() for p in pieces)
    assert total == 4 - 1  # area of a minus overlap
    gb = GeneralizedBlock(tuple(pieces))
    assert gb.proper


# ---------------------------------------------------------------------------
# countable reduction
# ---------------------------------------------------------------------------

def test_reduction_overlapping_intervals():
    # DERIVED by hand: [0,2] and [1,3] reduce to a partition of total mu 3
    out = countable_reduction([
        GeneralizedBlock.of(Block.interval(0, 2)),
        GeneralizedBlock.of(Block.interval(1, 3)),
    ])
    assert out[0].volume_exact() == 2
    assert out[1].volume_exact() == 1
    all_blocks = GeneralizedBlock(out[0].blocks + out[1].blocks)
    assert all_blocks.proper
    assert all_blocks.volume_exact() == 3


def test_reduction_disjoint_input_unchanged():
    a = Block.interval(0, 1)
    b = Block.interval(2, 3)
    out = countable_reduction([GeneralizedBlock.of(a), GeneralizedBlock.of(b)])
    assert out[0].blocks == (a,)
    assert out[1].blocks == (b,)


def test_reduction_duplicate_block_single_copy():
    a = Block.interval(0, 1)
    out = countable_reduction([GeneralizedBlock.of(a), GeneralizedBlock.of(a)])
    assert out[0].volume_exact() == 1
    assert out[1].volume_exact() == 0
    total = GeneralizedBlock(out[0].blocks + out[1].blocks)
    assert total.volume_exact() == 1


def test_reduction_2d_overlaps_proper():
    gbs = [
        GeneralizedBlock.of(Block.make((0, 2), (0, 2))),
        GeneralizedBlock.of(Block.make((1, 3), (1, 3))),
        GeneralizedBlock.of(Block.make((0, 3), (0, 3))),
    ]
    out = countable_reduction(gbs)
    merged = GeneralizedBlock(tuple(b for gb in out for b in gb.blocks))
    assert merged.proper
    assert merged.volume_exact() == 9  # union is the full 3x3 square


# ---------------------------------------------------------------------------
# simple approximation
# ---------------------------------------------------------------------------

def test_simple_approx_constant_is_itself():
    F = RegularSVF(
        (Block.interval(0, 1),),
        ((const_chunk(0, F12),),),
    )
    fhat, dom = simple_approx(F, 0.25)
    assert len(fhat.pieces) == 1
    blk, vals = fhat.pieces[0]
    assert blk == Block.interval(0, 1)
    assert vals == ((Fraction(0), F12),)
    # domain = full X
    assert sum(b.volume() for b in dom.base) == 1


def test_simple_approx_linear_chunk_hausdorff():
    F = RegularSVF((Block.interval(0, 1),), ((linear_chunk(),),))
    delta = 0.25
    fhat, dom = simple_approx(F, delta)
    assert len(fhat.pieces) >= 4
    rng = np.random.default_rng(23)
    # DERIVED oracle: direct evaluation on 10^3 samples
    for _ in range(1000):
        x = rng.uniform(0, 1)
        idx = fhat.piece_index([Fraction(x)])
        if idx is None:
            continue
        lo, hi = fhat.pieces[idx][1][0]
        # Hausdorff between [0, x] and the frozen interval
        h = max(abs(float(lo) - 0.0), abs(float(hi) - x))
        assert h <= delta + 1e-12


def test_simple_approx_two_chunk_preserves_count():
    F = RegularSVF(
        (Block.interval(0, 1),),
        ((const_chunk(0, 0), Chunk(
            alpha=lambda x: float(np.atleast_1d(x)[0]),
            beta=lambda x: 1.0,
            modulus=Modulus.lipschitz(1.0),
        )),),
    )
    delta = 0.25
    fhat, _ = simple_approx(F, delta)
    rng = np.random.default_rng(5)
    for blk, vals in fhat.pieces:
        assert len(vals) == 2
    # sampled Hausdorff per chunk
    for _ in range(1000):
        x = rng.uniform(0, 1)
        idx = fhat.piece_index([Fraction(x)])
        (l0, h0), (l1, h1) = fhat.pieces[idx][1]
        assert max(abs(float(l0)), abs(float(h0))) <= delta
        assert max(abs(float(l1) - x), abs(float(h1) - 1.0)) <= delta + 1e-12


def test_simple_approx_missing_modulus_contract_error():
    F = RegularSVF(
        (Block.interval(0, 1),),
        ((Chunk(alpha=lambda x: 0.0, beta=lambda x: 1.0, modulus=None),),),
    )
    with pytest.raises(ContractError):
        simple_approx(F, 0.1)


# ---------------------------------------------------------------------------
# selector extraction
# ---------------------------------------------------------------------------

def test_extract_constant_full_interval():
    F = RegularSVF((Block.interval(0, 1),), ((const_chunk(0, 1),),))
    sel = extract_selector(F, 0.25)
    assert sel.proper()
    rng = np.random.default_rng(1)
    for x in rng.uniform(0, 1, 200):
        v = sel(np.array([x]))
        assert v is not None
        assert F.located_distance_to(np.array([x]), v) <= 1e-12


def test_extract_sign_dependent_chunks():
    # [0, 1/4] for x < 0 and [3/4, 1] for x > 0, eps = 1/8
    F = RegularSVF(
        (Block.interval(-1, 0), Block.interval(0, 1)),
        ((const_chunk(0, 0.25),), (const_chunk(0.75, 1),)),
    )
    eps = 0.125
    sel = extract_selector(F, eps)
    assert sel.proper()
    dom = sel.domain
    rng = np.random.default_rng(2)
    pts = dom.sample_off_exception(rng, 1000, Fraction(1, 100))
    for x in pts:
        v = sel(x)
        assert v is not None
        assert F.located_distance_to(x, v) <= eps + 1e-12
    # the exception generator straddles x = 0 (an internal facet)
    J = dom.exception(Fraction(1, 100))
    assert J.contains([Fraction(0)])


def test_extract_singleton_graph_staircase():
    F = RegularSVF((Block.interval(0, 1),), ((identity_chunk(),),))
    eps = 0.25
    sel = extract_selector(F, eps)
    rng = np.random.default_rng(3)
    pts = sel.domain.sample_off_exception(rng, 500, Fraction(1, 64))
    # DERIVED: direct comparison against the identity
    for x in pts:
        v = sel(x)
        assert v is not None
        assert abs(v - float(x[0])) <= eps + 1e-12


def test_extract_exception_volume_within_budget():
    F = RegularSVF((Block.interval(0, 1),), ((identity_chunk(),),))
    sel = extract_selector(F, 0.25)
    for budget in (Fraction(1, 10), Fraction(1, 100), Fraction(1, 1000)):
        J = sel.domain.exception(budget)
        assert J.volume_exact() <= budget


def test_extract_rescales_general_value_range():
    # F(x) = {4x - 2} on [0, 1], values in [-2, 2]
    F = RegularSVF(
        (Block.interval(0, 1),),
        ((Chunk(
            alpha=lambda x: 4.0 * float(np.atleast_1d(x)[0]) - 2.0,
            beta=lambda x: 4.0 * float(np.atleast_1d(x)[0]) - 2.0,
            modulus=Modulus.lipschitz(4.0),
        ),),),
        value_range=(Fraction(-2), Fraction(2)),
    )
    eps = 0.5
    sel = extract_selector(F, eps)
    rng = np.random.default_rng(4)
    pts = sel.domain.sample_off_exception(rng, 300, Fraction(1, 64))
    for x in pts:
        v = sel(x)
        assert abs(v - (4.0 * float(x[0]) - 2.0)) <= eps + 1e-12


def test_extract_rejects_bad_eps():
    F = RegularSVF((Block.interval(0, 1),), ((const_chunk(0, 1),),))
    with pytest.raises(ArgumentError):
        extract_selector(F, 0.0)


# ---------------------------------------------------------------------------
# refinement / Cauchy certificate
# ---------------------------------------------------------------------------

def test_refine_constant_stabilizes_after_stage_one():
    F = RegularSVF((Block.interval(0, 1),), ((const_chunk(0, 1),),))
    sels = refine_selector(F, 4)
    xs = np.linspace(0.05, 0.95, 19)
    for k in range(1, len(sels)):
        for x in xs:
            assert sels[k](np.array([x])) == sels[0](np.array([x]))


def test_refine_identity_cauchy_and_convergence():
    F = RegularSVF((Block.interval(0, 1),), ((identity_chunk(),),))
    n = 6
    sels = refine_selector(F, n)
    rng = np.random.default_rng(8)
    xs = rng.uniform(0.01, 0.99, 200)
    for k in range(1, n):
        bound = 2.0 ** -(k)  # |f_{k+1} - f_k| <= 2^-k (stage k+1 uses 2^-((k+1)-1))
        diffs = []
        for x in xs:
            a, b = sels[k](np.array([x])), sels[k - 1](np.array([x]))
            if a is not None and b is not None:
                diffs.append(abs(a - b))
        assert max(diffs) <= 2.0 ** -(k - 1) + 1e-12
    # final stage approximates the identity
    errs = [abs(sels[-1](np.array([x])) - x) for x in xs]
    assert max(errs) <= 2.0 ** -n + 2.0 ** -(n + 1) + 1e-9


def test_refine_two_point_set_stabilizes_branch():
    # F = {0} u {1}: DERIVED by running 6 stages and checking stabilization
    F = RegularSVF(
        (Block.interval(0, 1),),
        ((const_chunk(0, 0), const_chunk(1, 1)),),
    )
    sels = refine_selector(F, 6)
    xs = np.linspace(0.1, 0.9, 9)
    last = [sels[-1](np.array([x])) for x in xs]
    prev = [sels[-2](np.array([x])) for x in xs]
    assert last == prev
    for v in last:
        assert min(abs(v - 0.0), abs(v - 1.0)) <= 2.0 ** -6 + 1e-12


def test_refine_inverse_generator_mismatch_raises():
    F = RegularSVF((Block.interval(0, 1),), ((identity_chunk(),),))

    def bogus(rs, radius):
        return GeneralizedBlock(())  # claims nothing is ever close

    with pytest.raises(ContractError):
        refine_selector(F, 3, inverse_generator=bogus)


def test_stage_domains_preserve_volume():
    F = RegularSVF(
        (Block.interval(-1, 0), Block.interval(0, 1)),
        ((const_chunk(0, 0.25),), (const_chunk(0.75, 1),)),
    )
    sels = refine_selector(F, 5)
    vols = [sum((b.volume() for b, _ in s.pieces), Fraction(0)) for s in sels]
    assert all(v == vols[0] for v in vols)
    assert vols[0] == 2
