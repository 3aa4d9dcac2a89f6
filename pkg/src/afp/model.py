"""Exact data model: tracial direct sums, multimatrix algebras, embeddings.

A :class:`TracialAlgebra` is a finite direct sum of weighted summands, each
one of

* ``matrix(n)``   -- the full matrix algebra M_n
* ``interval(n)`` -- L^inf[0,1] tensor M_n
* ``hyp2``        -- the hyperfinite II_1 factor
* ``ifgf(t)``     -- the interpolated free group factor L(F_t), 1 < t <= inf

with weights equal to the trace of the corresponding central projection.
Summands are never merged, even when two descriptors coincide.

Projections are described summand by summand (:class:`ProjectionSpec`):
a rank for type I summands, a relative trace for II_1 summands.  Embeddings
of a multimatrix algebra are coupling tables (:class:`Inclusion`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .extrat import ExtRat, as_extrat

__all__ = [
    "Kind",
    "Summand",
    "TracialAlgebra",
    "MultiMatrix",
    "ProjectionSpec",
    "Inclusion",
    "FdimValue",
    "Diagnostic",
    "matrix",
    "interval",
    "hyperfinite",
    "ifgf",
    "factor",
    "algebra",
    "multimatrix",
    "validate",
    "fdim",
    "fdim_multimatrix",
    "compress",
    "dilate_factor",
    "central_carrier_complement",
    "restrict_to_corner",
    "restrict_summands",
    "corner",
    "projection_from_traces",
    "canonicalize",
    "canonical_order",
    "scalar_inclusion",
    "identity_inclusion",
]

ZERO = ExtRat(0)
ONE = ExtRat(1)


class Kind(str, Enum):
    MATRIX = "matrix"
    INTERVAL = "interval"
    HYPII1 = "hyp2"
    IFGF = "ifgf"


_KIND_ORDER = {Kind.MATRIX: 0, Kind.INTERVAL: 1, Kind.HYPII1: 2, Kind.IFGF: 3}


@dataclass(frozen=True)
class Summand:
    kind: Kind
    param: int | ExtRat | None
    weight: ExtRat

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "weight", as_extrat(self.weight))
        if self.kind is Kind.IFGF:
            object.__setattr__(self, "param", as_extrat(self.param))
        elif self.kind is Kind.HYPII1:
            object.__setattr__(self, "param", None)
        elif not isinstance(self.param, int) or isinstance(self.param, bool):
            raise TypeError(f"{self.kind.value} summand needs an integer size")

    @property
    def is_factor(self) -> bool:
        """True for II_1 factor summands (hyperfinite or interpolated free group)."""
        return self.kind in (Kind.HYPII1, Kind.IFGF)

    @property
    def is_type_one(self) -> bool:
        return self.kind in (Kind.MATRIX, Kind.INTERVAL)

    @property
    def size(self) -> int:
        if not self.is_type_one:
            raise ValueError(f"{self.describe()} has no matrix size")
        return self.param

    @property
    def factor_param(self) -> ExtRat:
        # hyperfinite factor enters the formulas with parameter 1
        if self.kind is Kind.HYPII1:
            return ONE
        if self.kind is Kind.IFGF:
            return self.param
        raise ValueError(f"{self.describe()} is not a II_1 factor")

    @property
    def free_dim(self) -> ExtRat:
        if self.kind is Kind.MATRIX:
            return ONE - ExtRat(Fraction(1, self.param**2))
        if self.kind is Kind.IFGF:
            return self.param
        return ONE

    @property
    def dim(self) -> int | None:
        """Vector space dimension; None when infinite."""
        return self.param**2 if self.kind is Kind.MATRIX else None

    @property
    def min_trace(self) -> ExtRat:
        """Global trace of a minimal (rank one) projection of a type I summand."""
        return self.weight / self.size

    def with_weight(self, weight) -> "Summand":
        return Summand(self.kind, self.param, as_extrat(weight))

    def descriptor(self) -> str:
        if self.kind is Kind.HYPII1:
            return "hyp2"
        return f"{self.kind.value}({self.param})"

    describe = descriptor

    def sort_key(self):
        if self.kind is Kind.IFGF:
            pkey = self.param.sort_key()
        elif self.kind is Kind.HYPII1:
            pkey = (0, Fraction(0))
        else:
            pkey = (0, Fraction(self.param))
        return (_KIND_ORDER[self.kind], pkey, self.weight.sort_key())

    def __str__(self):
        return f"{self.descriptor()}@{self.weight}"


def matrix(n: int, weight=1) -> Summand:
    return Summand(Kind.MATRIX, n, as_extrat(weight))


def interval(n: int, weight=1) -> Summand:
    return Summand(Kind.INTERVAL, n, as_extrat(weight))


def hyperfinite(weight=1) -> Summand:
    return Summand(Kind.HYPII1, None, as_extrat(weight))


def ifgf(t, weight=1) -> Summand:
    return Summand(Kind.IFGF, as_extrat(t), as_extrat(weight))


def factor(t, weight=1) -> Summand:
    """II_1 factor summand from a parameter, reading t = 1 as hyperfinite."""
    t = as_extrat(t)
    return hyperfinite(weight) if t == 1 else ifgf(t, weight)


@dataclass(frozen=True)
class TracialAlgebra:
    summands: tuple[Summand, ...]

    def __post_init__(self):
        object.__setattr__(self, "summands", tuple(self.summands))

    def __len__(self):
        return len(self.summands)

    def __iter__(self):
        return iter(self.summands)

    def __getitem__(self, i):
        return self.summands[i]

    @property
    def weights(self) -> tuple[ExtRat, ...]:
        return tuple(s.weight for s in self.summands)

    @property
    def is_single_factor(self) -> bool:
        return len(self.summands) == 1 and self.summands[0].is_factor

    @property
    def is_type_one(self) -> bool:
        return all(s.is_type_one for s in self.summands)

    @property
    def has_factor_summand(self) -> bool:
        return any(s.is_factor for s in self.summands)

    @property
    def dim(self) -> int | None:
        dims = [s.dim for s in self.summands]
        return None if any(d is None for d in dims) else sum(dims)

    @property
    def in_r0(self) -> bool:
        return all(not (s.kind is Kind.IFGF and s.param.is_inf) for s in self.summands)

    def describe(self) -> str:
        return " + ".join(str(s) for s in self.summands)

    def __str__(self):
        return self.describe()


def algebra(*summands: Summand) -> TracialAlgebra:
    return TracialAlgebra(tuple(summands))


@dataclass(frozen=True)
class MultiMatrix:
    """D = sum_j M_{m_j} with central weights gamma_j."""

    blocks: tuple[tuple[int, ExtRat], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "blocks", tuple((int(m), as_extrat(g)) for m, g in self.blocks)
        )

    def __len__(self):
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(m for m, _ in self.blocks)

    @property
    def weights(self) -> tuple[ExtRat, ...]:
        return tuple(g for _, g in self.blocks)

    @property
    def min_traces(self) -> tuple[ExtRat, ...]:
        return tuple(g / m for m, g in self.blocks)

    @property
    def is_commutative(self) -> bool:
        return all(m == 1 for m, _ in self.blocks)

    @property
    def is_scalars(self) -> bool:
        return len(self.blocks) == 1 and self.blocks[0][0] == 1

    @property
    def dim(self) -> int:
        return sum(m * m for m, _ in self.blocks)

    def as_algebra(self) -> TracialAlgebra:
        return TracialAlgebra(tuple(matrix(m, g) for m, g in self.blocks))

    def describe(self) -> str:
        return " + ".join(f"matrix({m})@{g}" for m, g in self.blocks)


def multimatrix(*blocks) -> MultiMatrix:
    return MultiMatrix(tuple(blocks))


@dataclass(frozen=True)
class ProjectionSpec:
    """Per-summand description of a projection.

    Type I summands carry an integer rank (a multiplicity, constant across the
    interval, for ``interval(n)``); II_1 summands carry the relative trace of
    the component inside that summand.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, int) and not isinstance(c, bool) else as_extrat(c)
            for c in self.components
        )
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def summand_traces(self, alg: TracialAlgebra) -> tuple[ExtRat, ...]:
        out = []
        for s, c in zip(alg.summands, self.components):
            if s.is_type_one:
                out.append(s.weight * c / s.size)
            else:
                out.append(s.weight * c)
        return tuple(out)

    def trace(self, alg: TracialAlgebra) -> ExtRat:
        return sum(self.summand_traces(alg), ZERO)

    @property
    def full_central_support(self) -> bool:
        return all(c != 0 for c in self.components)

    def is_full_in(self, alg: TracialAlgebra, i: int) -> bool:
        s, c = alg[i], self.components[i]
        return c == s.size if s.is_type_one else c == 1


@dataclass(frozen=True)
class Inclusion:
    """Unital trace-compatible embedding of a multimatrix algebra.

    ``coupling[i][j]`` describes how the j-th block of the source sits in the
    i-th summand of the target: an integer multiplicity for type I targets, or
    the global trace of the image of a minimal projection for II_1 targets.
    """

    source: MultiMatrix
    target: TracialAlgebra
    coupling: tuple[tuple, ...]

    def __post_init__(self):
        rows = []
        for row in self.coupling:
            rows.append(
                tuple(
                    c if isinstance(c, int) and not isinstance(c, bool) else as_extrat(c)
                    for c in row
                )
            )
        object.__setattr__(self, "coupling", tuple(rows))

    def trace(self, i: int, j: int) -> ExtRat:
        """Global trace of the image in summand i of a minimal projection of block j."""
        s = self.target[i]
        c = self.coupling[i][j]
        if s.is_type_one:
            return s.weight * c / s.size
        return as_extrat(c)

    def block_traces(self, j: int) -> tuple[ExtRat, ...]:
        return tuple(self.trace(i, j) for i in range(len(self.target)))

    def is_isomorphism(self) -> bool:
        """True when the embedding identifies the source with the whole target."""
        if len(self.target) != len(self.source) or not all(
            s.kind is Kind.MATRIX for s in self.target
        ):
            return False
        hit = set()
        for i, row in enumerate(self.coupling):
            nz = [j for j, c in enumerate(row) if c != 0]
            if len(nz) != 1 or row[nz[0]] != 1:
                return False
            if self.target[i].size != self.source.sizes[nz[0]]:
                return False
            hit.add(nz[0])
        return len(hit) == len(self.source)

    @classmethod
    def from_traces(cls, source: MultiMatrix, target: TracialAlgebra, traces) -> "Inclusion":
        """Build a coupling table from global traces ``traces[i][j]``.

        Raises ValueError if a type I summand would need a non-integral
        multiplicity.
        """
        rows = []
        for i, s in enumerate(target.summands):
            row = []
            for j in range(len(source)):
                t = as_extrat(traces[i][j])
                if s.is_type_one:
                    k = t * s.size / s.weight
                    if not k.is_integer():
                        raise ValueError(
                            f"multiplicity {k} of block {j} in summand {i} is not an integer"
                        )
                    row.append(k.numerator)
                else:
                    row.append(t)
            rows.append(tuple(row))
        return cls(source, target, tuple(rows))


def scalar_inclusion(alg: TracialAlgebra) -> Inclusion:
    """The unital embedding of the scalars."""
    D = MultiMatrix(((1, ONE),))
    rows = tuple((s.size,) if s.is_type_one else (s.weight,) for s in alg.summands)
    return Inclusion(D, alg, rows)


def identity_inclusion(D: MultiMatrix) -> Inclusion:
    n = len(D)
    rows = tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))
    return Inclusion(D, D.as_algebra(), rows)


@dataclass(frozen=True)
class FdimValue:
    """A free dimension together with the rule applications producing it."""

    value: ExtRat
    ledger: tuple[tuple[str, dict], ...] = field(default=())

    def recompute(self) -> ExtRat:
        total = ZERO
        for tag, refs in self.ledger:
            if tag == "base":
                total = total + refs["value"]
            elif tag in ("iv'", "block"):
                total = total + refs["weight"] ** 2 * (refs["d"] - 1)
            else:
                raise ValueError(f"unknown ledger tag {tag!r}")
        return total


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


# ---------------------------------------------------------------------------
# validation


def _check_weights(weights: Sequence[ExtRat], prefix: str) -> list[Diagnostic]:
    out = []
    if not weights:
        out.append(Diagnostic(prefix, "no summands"))
        return out
    for i, w in enumerate(weights):
        if w.is_inf or w <= 0 or w > 1:
            out.append(Diagnostic(f"{prefix}[{i}].weight", f"weight {w} outside (0,1]"))
    if all(w.is_finite for w in weights):
        total = sum(weights, ZERO)
        if total != 1:
            out.append(Diagnostic(prefix, f"weights sum {total} ≠ 1"))
    return out


def _validate_algebra(alg: TracialAlgebra, prefix: str = "summands") -> list[Diagnostic]:
    out = _check_weights(alg.weights, prefix)
    for i, s in enumerate(alg.summands):
        if s.is_type_one and s.param < 1:
            out.append(Diagnostic(f"{prefix}[{i}].kind", f"size {s.param} must be positive"))
        if s.kind is Kind.IFGF and s.param <= 1:
            out.append(Diagnostic(f"{prefix}[{i}].kind", f"ifgf parameter {s.param} must exceed 1"))
    return out


def _validate_multimatrix(D: MultiMatrix, prefix: str = "blocks") -> list[Diagnostic]:
    out = _check_weights(D.weights, prefix)
    for j, m in enumerate(D.sizes):
        if m < 1:
            out.append(Diagnostic(f"{prefix}[{j}].size", f"size {m} must be positive"))
    return out


def _validate_inclusion(incl: Inclusion) -> list[Diagnostic]:
    out = _validate_multimatrix(incl.source, "source")
    out += _validate_algebra(incl.target, "target")
    if out:
        return out
    D, A = incl.source, incl.target
    if len(incl.coupling) != len(A) or any(len(r) != len(D) for r in incl.coupling):
        return [Diagnostic("coupling", f"table must be {len(A)} x {len(D)}")]
    for i, s in enumerate(A.summands):
        row = incl.coupling[i]
        path = f"coupling[{i}]"
        if s.is_type_one:
            if not all(isinstance(c, int) and c >= 0 for c in row):
                out.append(Diagnostic(path, f"summand {i} is type I; couplings must be integer multiplicities (mult)"))
                continue
            total = sum(m * k for m, k in zip(D.sizes, row))
            if total != s.size:
                out.append(Diagnostic(path, f"non-unital at summand {i}: sum m_j k_ij = {total} ≠ {s.size}"))
        else:
            vals = [as_extrat(c) for c in row]
            if any(v.is_inf or v < 0 for v in vals):
                out.append(Diagnostic(path, f"summand {i}: traces must be finite and nonnegative"))
                continue
            total = sum((m * v for m, v in zip(D.sizes, vals)), ZERO)
            if total != s.weight:
                out.append(Diagnostic(path, f"non-unital at summand {i}: sum m_j c_ij = {total} ≠ {s.weight}"))
    if out:
        return out
    for j, (m, g) in enumerate(D.blocks):
        got = sum(incl.block_traces(j), ZERO)
        if got != g / m:
            out.append(
                Diagnostic(f"source[{j}]", f"trace mismatch: minimal projection has trace {got}, expected {g / m}")
            )
    return out


def validate(obj) -> list[Diagnostic]:
    """Check every type invariant; violations come back as data."""
    if isinstance(obj, TracialAlgebra):
        return _validate_algebra(obj)
    if isinstance(obj, MultiMatrix):
        return _validate_multimatrix(obj)
    if isinstance(obj, Inclusion):
        return _validate_inclusion(obj)
    raise TypeError(f"cannot validate {type(obj).__name__}")


# ---------------------------------------------------------------------------
# free dimension


def fdim(alg: TracialAlgebra) -> FdimValue:
    """Free dimension of the standard generating set: 1 + sum a_i^2 (d_i - 1)."""
    ledger = [("base", {"value": ONE})]
    value = ONE
    for i, s in enumerate(alg.summands):
        d = s.free_dim
        ledger.append(("iv'", {"summand": i, "kind": s.descriptor(), "weight": s.weight, "d": d}))
        value = value + s.weight**2 * (d - 1)
    return FdimValue(value, tuple(ledger))


def fdim_multimatrix(D: MultiMatrix) -> FdimValue:
    ledger = [("base", {"value": ONE})]
    value = ONE
    for j, (m, g) in enumerate(D.blocks):
        d = ONE - ExtRat(Fraction(1, m * m))
        ledger.append(("block", {"block": j, "size": m, "weight": g, "d": d}))
        value = value - (g / m) ** 2
    return FdimValue(value, tuple(ledger))


# ---------------------------------------------------------------------------
# compression / dilation


def compress(alg: TracialAlgebra, p: ProjectionSpec) -> TracialAlgebra:
    """The corner pAp with its renormalized trace.

    ``p`` must have full central support; drop zero components beforehand
    with :func:`restrict_summands`.
    """
    if len(p) != len(alg):
        raise ValueError("projection does not match the algebra")
    if not p.full_central_support:
        raise ValueError("not full central support")
    traces = p.summand_traces(alg)
    total = sum(traces, ZERO)
    out = []
    for s, c, tr in zip(alg.summands, p.components, traces):
        w = tr / total
        if s.kind is Kind.MATRIX:
            out.append(matrix(c, w))
        elif s.kind is Kind.INTERVAL:
            out.append(interval(c, w))
        elif s.kind is Kind.HYPII1:
            out.append(hyperfinite(w))
        else:
            out.append(ifgf(1 + as_extrat(c) ** -2 * (s.param - 1), w))
    return TracialAlgebra(tuple(out))


def dilate_factor(alg: TracialAlgebra, lam) -> TracialAlgebra:
    """Inverse of compression on a single II_1 factor.

    ``alg`` is the corner of the result cut by a projection of trace ``lam``.
    """
    lam = as_extrat(lam)
    if len(alg) != 1:
        raise ValueError("ambiguous dilation")
    s = alg[0]
    if not s.is_factor:
        raise ValueError(f"cannot dilate {s.descriptor()}: not a II_1 factor")
    if lam.is_inf or lam <= 0 or lam > 1:
        raise ValueError(f"dilation scale {lam} outside (0,1]")
    if s.kind is Kind.HYPII1:
        return algebra(hyperfinite(1))
    return algebra(ifgf(1 + lam**2 * (s.param - 1), 1))


def central_carrier_complement(alg: TracialAlgebra, p: ProjectionSpec) -> ProjectionSpec:
    """The part of the central carrier of 1 - p lying under p."""
    comps = []
    for i, c in enumerate(p.components):
        if c == 0 or p.is_full_in(alg, i):
            comps.append(0 if alg[i].is_type_one else ZERO)
        else:
            comps.append(c)
    return ProjectionSpec(tuple(comps))


def restrict_summands(alg: TracialAlgebra, keep: Iterable[int]) -> TracialAlgebra:
    """Cut by the central projection onto the listed summands, renormalizing."""
    keep = list(keep)
    total = sum((alg[i].weight for i in keep), ZERO)
    if total == 0:
        raise ValueError("empty summand restriction")
    return TracialAlgebra(tuple(alg[i].with_weight(alg[i].weight / total) for i in keep))


def projection_from_traces(alg: TracialAlgebra, traces: Sequence) -> ProjectionSpec:
    """ProjectionSpec with the given global trace in each summand."""
    comps = []
    for i, (s, t) in enumerate(zip(alg.summands, traces)):
        t = as_extrat(t)
        if t < 0 or t > s.weight:
            raise ValueError(f"trace {t} in summand {i} outside [0, {s.weight}]")
        if s.is_type_one:
            k = t * s.size / s.weight
            if not k.is_integer():
                raise ValueError(f"rank {k} in summand {i} is not an integer")
            comps.append(k.numerator)
        else:
            comps.append(t / s.weight)
    return ProjectionSpec(tuple(comps))


def corner(alg: TracialAlgebra, traces: Sequence) -> tuple[TracialAlgebra, tuple[int, ...]]:
    """Corner cut by a projection given by global traces per summand.

    Summands where the projection vanishes are dropped first.  Returns the
    compressed algebra and the indices of the retained summands.
    """
    traces = [as_extrat(t) for t in traces]
    keep = tuple(i for i, t in enumerate(traces) if t != 0)
    if not keep:
        raise ValueError("zero projection")
    sub = restrict_summands(alg, keep)
    scale = sum((alg[i].weight for i in keep), ZERO)
    p = projection_from_traces(sub, [traces[i] / scale for i in keep])
    return compress(sub, p), keep


def restrict_to_corner(incl: Inclusion, q: ProjectionSpec) -> tuple[Inclusion, ExtRat]:
    """Cut an inclusion D -> A by an abelian projection q of D of central support 1.

    Returns the induced inclusion qDq -> qAq (qDq is commutative) and the
    trace scale tau(q).
    """
    D, A = incl.source, incl.target
    if len(q) != len(D):
        raise ValueError("projection does not match D")
    if any(c != 1 for c in q.components):
        raise ValueError("q must be abelian with central support 1 in D (rank one in every block)")
    scale = sum(D.min_traces, ZERO)
    qD = MultiMatrix(tuple((1, t / scale) for t in D.min_traces))
    qA_traces = [sum((incl.trace(i, j) for j in range(len(D))), ZERO) for i in range(len(A))]
    qA, keep = corner(A, qA_traces)
    traces = [[incl.trace(i, j) / scale for j in range(len(D))] for i in keep]
    return Inclusion.from_traces(qD, qA, traces), scale


def canonicalize(alg: TracialAlgebra) -> TracialAlgebra:
    return TracialAlgebra(tuple(sorted(alg.summands, key=Summand.sort_key)))


def canonical_order(alg: TracialAlgebra) -> list[int]:
    """Permutation sorting the summands into canonical order."""
    return sorted(range(len(alg)), key=lambda i: alg[i].sort_key())
