"""Measurable-selector machinery on rational block algebra.

Blocks are closed hyperrectangles with rational vertices, so emptiness,
intersection, set difference and volume are all exactly decidable.  A
regular set-valued function (finitely many chunks per domain block with
continuous boundary functions) is first frozen into a simple set-valued
function on a refined partition, then a piecewise-constant selector is
extracted by the staged mesh recursion: at stage k the candidate values
form a dyadic mesh on [0, 1], the sets

    C_i = {x : |r_i - Fhat(x)| <= 2^-k - margin}
    D_i = {x : |r_i - f_{k-1}(x)| <= 2^-(k-1) - margin}

are computed exactly (both functions are block-constant), their
intersections are made disjoint by countable reduction, and f_k takes
value r_i on the reduced pieces.

The recursion is seeded with the codomain midpoint: seeding with 0 (the
bottom endpoint) strands chunks with values above 3/4 because the stage-2
conditions |r - 1| < 1/4 and |r - 0| < 1/2 cannot both hold.  The
midpoint start satisfies dist(f_0, Fhat(x)) <= 1/2 for every nonempty
value set, which is exactly the induction hypothesis the first stage
needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    ArgumentError,
    CertifiedReal,
    ContractError,
    InternalConsistencyError,
    Modulus,
)

__all__ = [
    "Block",
    "GeneralizedBlock",
    "RepresentableDomain",
    "Chunk",
    "RegularSVF",
    "SimpleSVF",
    "Selector",
    "volume",
    "countable_reduction",
    "simple_approx",
    "extract_selector",
    "refine_selector",
]

STRICTNESS_MARGIN_SHIFT = 4  # strict sets realized as closed sets shrunk by 2^-(k+4)


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


@dataclass(frozen=True)
class Block:
    """Closed hyperrectangle with rational vertices; may be empty."""

    intervals: tuple  # tuple[(Fraction lo, Fraction hi), ...]

    @classmethod
    def make(cls, *bounds) -> "Block":
        ivs = tuple((_frac(lo), _frac(hi)) for lo, hi in bounds)
        return cls(ivs)

    @classmethod
    def interval(cls, lo, hi) -> "Block":
        return cls.make((lo, hi))

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def is_empty(self) -> bool:
        return any(lo > hi for lo, hi in self.intervals)

    def volume(self) -> Fraction:
        if self.is_empty:
            return Fraction(0)
        v = Fraction(1)
        for lo, hi in self.intervals:
            v *= hi - lo
        return v

    def intersect(self, other: "Block") -> "Block":
        return Block(
            tuple(
                (max(a_lo, b_lo), min(a_hi, b_hi))
                for (a_lo, a_hi), (b_lo, b_hi) in zip(self.intervals, other.intervals)
            )
        )

    def interior_overlaps(self, other: "Block") -> bool:
        return all(
            max(a_lo, b_lo) < min(a_hi, b_hi)
            for (a_lo, a_hi), (b_lo, b_hi) in zip(self.intervals, other.intervals)
        )

    def contains(self, x) -> bool:
        for (lo, hi), xi in zip(self.intervals, x):
            xi = _frac(xi) if not isinstance(xi, Fraction) else xi
            if xi < lo or xi > hi:
                return False
        return True

    def subtract(self, other: "Block") -> list:
        """Closure of self minus other as interior-disjoint closed blocks."""
        if self.is_empty:
            return []
        if not self.interior_overlaps(other):
            return [self]
        c = self.intersect(other)
        pieces = []
        cur = list(self.intervals)
        for axis in range(self.dim):
            lo, hi = cur[axis]
            clo, chi = c.intervals[axis]
            if lo < clo:
                pieces.append(Block(tuple(cur[:axis] + [(lo, clo)] + cur[axis + 1 :])))
            if chi < hi:
                pieces.append(Block(tuple(cur[:axis] + [(chi, hi)] + cur[axis + 1 :])))
            cur[axis] = (clo, chi)
        return [p for p in pieces if p.volume() > 0]

    def center(self) -> tuple:
        return tuple((lo + hi) / 2 for lo, hi in self.intervals)

    def center_float(self) -> np.ndarray:
        return np.array([float((lo + hi) / 2) for lo, hi in self.intervals])

    def euclid_diameter(self) -> float:
        return math.sqrt(sum(float(hi - lo) ** 2 for lo, hi in self.intervals))

    def halve_longest(self) -> tuple["Block", "Block"]:
        axis = max(range(self.dim), key=lambda d: self.intervals[d][1] - self.intervals[d][0])
        lo, hi = self.intervals[axis]
        mid = (lo + hi) / 2
        left = Block(self.intervals[:axis] + ((lo, mid),) + self.intervals[axis + 1 :])
        right = Block(self.intervals[:axis] + ((mid, hi),) + self.intervals[axis + 1 :])
        return left, right

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        lo = np.array([float(a) for a, _ in self.intervals])
        hi = np.array([float(b) for _, b in self.intervals])
        return rng.uniform(lo, hi, size=(size, self.dim))


@dataclass(frozen=True)
class GeneralizedBlock:
    """Union of blocks; proper when the pieces are pairwise
    interior-disjoint (decided exactly) and locally finitely enumerable."""

    blocks: tuple
    infinite: bool = False  # descriptor for generator-backed sequences

    @classmethod
    def of(cls, *blocks) -> "GeneralizedBlock":
        return cls(tuple(blocks))

    @property
    def locally_finitely_enumerable(self) -> bool:
        return not self.infinite

    @property
    def proper(self) -> bool:
        if self.infinite:
            return False
        bs = [b for b in self.blocks if not b.is_empty]
        for i in range(len(bs)):
            for j in range(i + 1, len(bs)):
                if bs[i].interior_overlaps(bs[j]):
                    return False
        return True

    def volume_exact(self) -> Fraction:
        return sum((b.volume() for b in self.blocks), Fraction(0))

    def contains(self, x) -> bool:
        return any(b.contains(x) for b in self.blocks)


def volume(gb: GeneralizedBlock) -> CertifiedReal:
    """Exact rational volume; radius covers only the float conversion
    (zero for dyadic sums)."""
    if gb.infinite and not gb.proper:
        raise ContractError("volume of a non-proper infinite generalized block is undefined")
    exact = gb.volume_exact()
    v = float(exact)
    gap = abs(Fraction(v) - exact)
    return CertifiedReal(v, float(gap) * (1.0 + 1e-12))


def countable_reduction(gbs: Sequence) -> list:
    """Convert a sequence of generalized blocks into pairwise
    interior-disjoint ones: each entry keeps what earlier entries have
    not already claimed.  Union preserved up to shared facets."""
    placed: list[Block] = []
    out = []
    for gb in gbs:
        blocks = gb.blocks if isinstance(gb, GeneralizedBlock) else tuple(gb)
        kept: list[Block] = []
        for blk in blocks:
            if blk.is_empty or blk.volume() == 0:
                continue
            frontier = [blk]
            for p in placed:
                frontier = [piece for f in frontier for piece in f.subtract(p)]
                if not frontier:
                    break
            kept.extend(frontier)
        placed.extend(kept)
        out.append(GeneralizedBlock(tuple(kept)))
    return out


@dataclass(frozen=True)
class RepresentableDomain:
    """Base blocks plus an exception generator: for any eps the generator
    returns a generalized block J with volume <= eps containing the
    boundary structure, and base \\ J is covered by the base blocks."""

    base: tuple  # tuple[Block]
    exception_generator: Callable[[Fraction], GeneralizedBlock]

    def exception(self, eps) -> GeneralizedBlock:
        eps = _frac(eps)
        if eps <= 0:
            raise ArgumentError("exception budget must be positive")
        J = self.exception_generator(eps)
        if J.volume_exact() > eps:
            raise InternalConsistencyError("exception generator exceeded its volume budget")
        return J

    def sample_off_exception(self, rng: np.random.Generator, n: int, eps) -> np.ndarray:
        """Sample base points outside the exception block J(eps)."""
        J = self.exception(eps)
        vols = np.array([float(b.volume()) for b in self.base])
        if vols.sum() <= 0:
            raise ContractError("representable domain has no volume")
        probs = vols / vols.sum()
        out = []
        guard = 0
        while len(out) < n and guard < 100 * n:
            guard += 1
            b = self.base[int(rng.choice(len(self.base), p=probs))]
            x = b.sample(rng, 1)[0]
            if not J.contains([Fraction(float(v)) for v in x]):
                out.append(x)
        if len(out) < n:
            raise InternalConsistencyError("exception set rejected nearly every sample")
        return np.array(out)


def _facet_exception_generator(blocks: Sequence[Block]) -> Callable[[Fraction], GeneralizedBlock]:
    """J(eps) = thin boxes around every block facet, width chosen so the
    total volume stays within eps (dyadic floor)."""
    facets = []  # (block, axis, coordinate, facet_area)
    total_area = Fraction(0)
    for b in blocks:
        if b.is_empty:
            continue
        for axis in range(b.dim):
            area = Fraction(1)
            for d, (lo, hi) in enumerate(b.intervals):
                if d != axis:
                    area *= hi - lo
            for coord in b.intervals[axis]:
                facets.append((b, axis, coord, area))
                total_area += area

    def gen(eps: Fraction) -> GeneralizedBlock:
        if not facets:
            return GeneralizedBlock(())
        w = eps / (2 * total_area)
        # dyadic floor keeps vertices rational with small denominators
        shift = max(0, math.ceil(-math.log2(float(w)))) + 1 if w > 0 else 1
        w = Fraction(math.floor(w * (1 << shift)), 1 << shift)
        if w == 0:
            w = eps / (4 * total_area)
        out = []
        for b, axis, coord, _ in facets:
            ivs = list(b.intervals)
            ivs[axis] = (coord - w, coord + w)
            out.append(Block(tuple(ivs)))
        return GeneralizedBlock(tuple(out))

    return gen


# ---------------------------------------------------------------------------
# Set-valued functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chunk:
    """One value chunk [alpha(x), beta(x)] with a shared modulus."""

    alpha: Callable[[np.ndarray], float]
    beta: Callable[[np.ndarray], float]
    modulus: Modulus
    eval_radius: float = 1e-9


@dataclass(frozen=True)
class RegularSVF:
    """Regular set-valued function: per domain block, finitely many chunks
    bounded by continuous functions with moduli."""

    domain_blocks: tuple  # tuple[Block]
    chunks_per_block: tuple  # tuple[tuple[Chunk, ...]]
    value_range: tuple = (Fraction(0), Fraction(1))
    inverse_generator: Optional[Callable] = None

    def __post_init__(self):
        if len(self.domain_blocks) != len(self.chunks_per_block):
            raise ArgumentError("one chunk list per domain block required")
        gb = GeneralizedBlock(tuple(self.domain_blocks))
        if not gb.proper:
            raise ArgumentError("domain blocks must be pairwise interior-disjoint")
        lo, hi = self.value_range
        if not _frac(lo) < _frac(hi):
            raise ArgumentError("value range must be a nondegenerate interval")
        object.__setattr__(self, "value_range", (_frac(lo), _frac(hi)))

    def block_index(self, x) -> Optional[int]:
        for i, b in enumerate(self.domain_blocks):
            if b.contains(x):
                return i
        return None

    def value_intervals(self, x) -> list:
        """F(x) as float chunk intervals (for sampling-based checks)."""
        i = self.block_index([Fraction(float(v)) for v in np.atleast_1d(x)])
        if i is None:
            return []
        xx = np.atleast_1d(np.asarray(x, dtype=float))
        out = []
        for ch in self.chunks_per_block[i]:
            a, b = float(ch.alpha(xx)), float(ch.beta(xx))
            out.append((min(a, b), max(a, b)))
        return out

    def located_distance_to(self, x, y: float) -> float:
        ivs = self.value_intervals(x)
        if not ivs:
            return math.inf
        return min(max(0.0, lo - y, y - hi) for lo, hi in ivs)

    def validate_sampled(self, rng: np.random.Generator, per_block: int = 64):
        """alpha <= beta and values inside the declared range, sampled."""
        lo, hi = float(self.value_range[0]), float(self.value_range[1])
        for b, chunks in zip(self.domain_blocks, self.chunks_per_block):
            xs = b.sample(rng, per_block)
            for ch in chunks:
                for x in xs:
                    a, bb = float(ch.alpha(x)), float(ch.beta(x))
                    if a > bb + 1e-9:
                        raise ContractError("chunk with alpha > beta")
                    if a < lo - 1e-9 or bb > hi + 1e-9:
                        raise ContractError("chunk escapes the declared value range")


@dataclass(frozen=True)
class SimpleSVF:
    """Block-constant set-valued function: rational value intervals per
    piece of a proper partition."""

    pieces: tuple  # tuple[(Block, tuple[(Fraction, Fraction), ...])]

    def piece_index(self, x) -> Optional[int]:
        for i, (b, _) in enumerate(self.pieces):
            if b.contains(x):
                return i
        return None

    @staticmethod
    def interval_distance(r: Fraction, intervals) -> Fraction:
        best = None
        for lo, hi in intervals:
            d = max(Fraction(0), lo - r, r - hi)
            best = d if best is None else min(best, d)
        if best is None:
            raise ContractError("simple SVF piece with empty value set")
        return best


@dataclass(frozen=True)
class Selector:
    """Piecewise-constant measurable selector with a located-distance
    certificate on a representable domain."""

    pieces: tuple  # tuple[(Block, Fraction value)]
    epsilon: float
    domain: RepresentableDomain
    stage: int = 0

    def __call__(self, x) -> Optional[float]:
        xf = [Fraction(float(v)) for v in np.atleast_1d(x)]
        for b, val in self.pieces:
            if b.contains(xf):
                return float(val)
        return None

    def value_exact(self, x) -> Optional[Fraction]:
        xf = [_frac(v) for v in np.atleast_1d(x)]
        for b, val in self.pieces:
            if b.contains(xf):
                return val
        return None

    def proper(self) -> bool:
        return GeneralizedBlock(tuple(b for b, _ in self.pieces)).proper


# ---------------------------------------------------------------------------
# simple approximation
# ---------------------------------------------------------------------------

def _dyadic_floor(x: float, shift: int) -> Fraction:
    return Fraction(math.floor(x * (1 << shift)), 1 << shift)


def _dyadic_ceil(x: float, shift: int) -> Fraction:
    return Fraction(math.ceil(x * (1 << shift)), 1 << shift)


def simple_approx(F: RegularSVF, delta: float, max_blocks: int = 200_000):
    """Freeze F into a block-constant set-valued function within Hausdorff
    distance delta, on a representable domain.

    Each domain block is refined until every chunk boundary varies at most
    delta/2 (per its modulus), then each chunk is frozen to the rational
    interval [round-down min alpha, round-up max beta].
    """
    if delta <= 0:
        raise ArgumentError("delta must be positive")
    for chunks in F.chunks_per_block:
        for ch in chunks:
            if ch.modulus is None:
                raise ContractError("chunk boundary function without modulus")
    shift = max(3, math.ceil(math.log2(8.0 / delta)))
    pieces = []
    for blk, chunks in zip(F.domain_blocks, F.chunks_per_block):
        if not chunks:
            raise ContractError("regular SVF block with no chunks")
        d_req = min(2.0 * ch.modulus.step(delta / 4.0) for ch in chunks)
        todo = [blk]
        leaves = []
        while todo:
            b = todo.pop()
            if b.euclid_diameter() <= d_req or b.volume() == 0:
                leaves.append(b)
            else:
                todo.extend(b.halve_longest())
            if len(leaves) + len(todo) > max_blocks:
                raise ContractError(
                    f"simple approximation needs more than {max_blocks} blocks; "
                    "coarsen delta"
                )
        for b in leaves:
            c = b.center_float()
            rad = b.euclid_diameter() / 2.0
            vals = []
            for ch in chunks:
                var = ch.modulus.forward_bound(rad) + ch.eval_radius
                lo = _dyadic_floor(float(ch.alpha(c)) - var, shift)
                hi = _dyadic_ceil(float(ch.beta(c)) + var, shift)
                vals.append((lo, hi))
            pieces.append((b, tuple(vals)))
    base = tuple(b for b, _ in pieces)
    domain = RepresentableDomain(base, _facet_exception_generator(base))
    return SimpleSVF(tuple(pieces)), domain


# ---------------------------------------------------------------------------
# selector extraction
# ---------------------------------------------------------------------------

def _stage_mesh(k: int) -> list:
    """Dyadic mesh on [0, 1] with spacing 2^-(k+1) (covering radius
    2^-(k+2), strictly finer than the 2^-(k+1) the recursion needs)."""
    n = 1 << (k + 1)
    return [Fraction(j, n) for j in range(n + 1)]


def _rescaled(F: RegularSVF):
    lo, hi = F.value_range
    scale = hi - lo

    def wrap(ch: Chunk) -> Chunk:
        s = float(scale)
        base_mod = ch.modulus
        return Chunk(
            alpha=lambda x, f=ch.alpha, l=float(lo), s=s: (f(x) - l) / s,
            beta=lambda x, f=ch.beta, l=float(lo), s=s: (f(x) - l) / s,
            modulus=Modulus.mu(lambda t, m=base_mod, s=s: m.forward_bound(t) / s),
            eval_radius=ch.eval_radius / s,
        )

    chunks = tuple(tuple(wrap(ch) for ch in chs) for chs in F.chunks_per_block)
    return RegularSVF(F.domain_blocks, chunks, (Fraction(0), Fraction(1))), lo, scale


def _clip_unit(iv):
    lo, hi = iv
    return (min(max(lo, Fraction(0)), Fraction(1)), min(max(hi, Fraction(0)), Fraction(1)))


def _run_stages(fhat: SimpleSVF, n_stages: int, snapshot=None):
    """The staged recursion; pieces never split because the C/D conditions
    are constant per piece, so countable reduction cancels whole blocks."""
    # current pieces: (block, value, frozen chunk intervals)
    pieces = [
        (b, Fraction(1, 2), tuple(_clip_unit(iv) for iv in vals)) for b, vals in fhat.pieces
    ]
    margin_shift = STRICTNESS_MARGIN_SHIFT
    history = []
    for k in range(1, n_stages + 1):
        mesh = _stage_mesh(k)
        t_c = Fraction(1, 1 << k) - Fraction(1, 1 << (k + margin_shift))
        t_d = Fraction(1, 1 << (k - 1)) - Fraction(1, 1 << (k + margin_shift))
        a_sets = []
        qualifying = []  # parallel: list of (piece index list) per r
        for r in mesh:
            idxs = [
                i
                for i, (b, fval, fvals) in enumerate(pieces)
                if SimpleSVF.interval_distance(r, fvals) <= t_c and abs(r - fval) <= t_d
            ]
            qualifying.append(idxs)
            a_sets.append(GeneralizedBlock(tuple(pieces[i][0] for i in idxs)))
        q_sets = countable_reduction(a_sets)
        new_pieces = []
        for r, q, idxs in zip(mesh, q_sets, qualifying):
            lookup = {id(pieces[i][0]): pieces[i][2] for i in idxs}
            for blk in q.blocks:
                fvals = lookup.get(id(blk))
                if fvals is None:
                    # split block: find an owning original piece
                    owner = next(
                        (pieces[i][2] for i in idxs if pieces[i][0].intersect(blk).volume() == blk.volume()),
                        None,
                    )
                    if owner is None:
                        raise InternalConsistencyError("reduced block without an owner piece")
                    fvals = owner
                new_pieces.append((blk, r, fvals))
        old_vol = sum((p[0].volume() for p in pieces), Fraction(0))
        new_vol = sum((p[0].volume() for p in new_pieces), Fraction(0))
        if new_vol != old_vol:
            raise InternalConsistencyError(
                f"stage {k} lost domain volume {old_vol - new_vol} beyond the "
                "certified exception set; simple approximation or moduli unsound"
            )
        pieces = new_pieces
        history.append(list(pieces))
        if snapshot is not None:
            snapshot(k, pieces)
    return pieces, history


def extract_selector(F: RegularSVF, eps: float, domain_eps=None) -> Selector:
    """Piecewise-constant selector with located distance <= eps to F on a
    representable domain (exceptions generated at budget domain_eps)."""
    if eps <= 0:
        raise ArgumentError("eps must be positive")
    Fr, lo, scale = _rescaled(F)
    eps_scaled = eps / float(scale)
    if eps_scaled > 1.0:
        eps_scaled = 1.0
    fhat, domain = simple_approx(Fr, eps_scaled / 2.0)
    n_stages = max(1, math.ceil(math.log2(2.0 / eps_scaled)))
    pieces, _ = _run_stages(fhat, n_stages)
    out = tuple((b, lo + r * scale) for b, r, _ in pieces)
    return Selector(out, eps, domain, stage=n_stages)


def refine_selector(
    F: RegularSVF,
    n_stages: int,
    inverse_generator: Optional[Callable] = None,
    rng: Optional[np.random.Generator] = None,
) -> list:
    """Successive selectors f_k, k = 1..n_stages, from one recursion at the
    finest accuracy: consecutive stages differ by at most 2^-(k-1) on the
    shared domain (the Cauchy certificate of the corollary)."""
    if n_stages < 1:
        raise ArgumentError("need at least one stage")
    gen = inverse_generator if inverse_generator is not None else F.inverse_generator
    if gen is not None:
        _check_inverse_generator(F, gen, rng or np.random.default_rng(0))
    Fr, lo, scale = _rescaled(F)
    fhat, domain = simple_approx(Fr, 0.5 ** (n_stages + 1))
    snaps = []

    def snap(k, pieces):
        out = tuple((b, lo + r * scale) for b, r, _ in pieces)
        snaps.append(Selector(out, float(scale) * 2.0 ** -k, domain, stage=k))

    _run_stages(fhat, n_stages, snapshot=snap)
    return snaps


def _check_inverse_generator(F: RegularSVF, gen, rng):
    """Spot-check Def.-1 style inverse domains against direct distances."""
    rs = [0.25, 0.5, 0.75]
    radius = 0.25
    claimed = gen(rs, radius)
    if not isinstance(claimed, GeneralizedBlock):
        raise ContractError("inverse generator must return a GeneralizedBlock")
    for b in F.domain_blocks:
        for x in b.sample(rng, 16):
            d = min(F.located_distance_to(x, r) for r in rs)
            inside = claimed.contains([Fraction(float(v)) for v in x])
            if d <= radius * 0.9 and not inside:
                raise ContractError(
                    f"inverse generator omits x={x} with distance {d} <= {radius}"
                )
            if d >= radius * 1.1 + 0.05 and inside:
                raise ContractError(
                    f"inverse generator claims x={x} with distance {d} > {radius}"
                )
