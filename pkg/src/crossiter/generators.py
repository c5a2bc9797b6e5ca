"""Construction of test matrices with exactly known spectral structure.

Matrices are built from declarative specs (symmetric or positive definite
eigenvalue lists, or orthogonal rotation-block layouts) so that the
diagnostics can work in the exact eigenbasis. An optional seeded orthogonal
similarity hides the canonical form without changing the spectrum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, PreconditionError, SpecError
from .linalg import Matrix, grade

KINDS = ("symmetric", "spd", "orthogonal")


@dataclass(frozen=True)
class SpectrumSpec:
    """Declarative description of a test matrix's spectral structure.

    ``rotation_blocks`` lists (c, s_sign) pairs for 2x2 rotation blocks with
    cosine c in (-1, 1) and sine s_sign * sqrt(1 - c^2); the optional [1]
    and [-1] blocks add real unit-circle eigenvalues. ``similarity_seed``
    conjugates the canonical form by a seeded random orthogonal matrix.
    """

    kind: str
    eigenvalues: tuple[float, ...] = ()
    rotation_blocks: tuple[tuple[float, int], ...] = ()
    has_plus_one: bool = False
    has_minus_one: bool = False
    similarity_seed: int | None = None
    distinct_required: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown spectrum kind {self.kind!r}, expected one of {KINDS}")
        object.__setattr__(self, "eigenvalues", tuple(float(x) for x in self.eigenvalues))
        object.__setattr__(
            self,
            "rotation_blocks",
            tuple((float(c), int(sg)) for c, sg in self.rotation_blocks),
        )
        if self.kind in ("symmetric", "spd"):
            if not self.eigenvalues:
                raise SpecError(f"{self.kind} spec needs at least one eigenvalue")
            if not all(np.isfinite(self.eigenvalues)):
                raise SpecError("eigenvalues must be finite")
            if self.rotation_blocks or self.has_plus_one or self.has_minus_one:
                raise SpecError(f"{self.kind} spec cannot carry rotation or unit blocks")
            if self.kind == "spd" and min(self.eigenvalues) <= 0.0:
                raise SpecError("spd spec requires strictly positive eigenvalues")
            if self.distinct_required and len(set(self.eigenvalues)) != len(self.eigenvalues):
                raise SpecError("eigenvalues must be pairwise distinct")
        else:
            if self.eigenvalues:
                raise SpecError("orthogonal spec takes rotation blocks, not eigenvalues")
            if not self.rotation_blocks and not (self.has_plus_one or self.has_minus_one):
                raise SpecError("orthogonal spec is empty")
            cs = [c for c, _ in self.rotation_blocks]
            if any(abs(c) >= 1.0 for c in cs):
                raise SpecError("rotation cosines must lie strictly inside (-1, 1)")
            if len(set(cs)) != len(cs):
                raise SpecError("rotation cosines must be pairwise distinct")
            if any(sg not in (-1, 1) for _, sg in self.rotation_blocks):
                raise SpecError("rotation sine signs must be +1 or -1")

    @property
    def n(self) -> int:
        if self.kind in ("symmetric", "spd"):
            return len(self.eigenvalues)
        return 2 * len(self.rotation_blocks) + int(self.has_plus_one) + int(self.has_minus_one)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "eigenvalues": list(self.eigenvalues),
            "rotation_blocks": [{"c": c, "s_sign": sg} for c, sg in self.rotation_blocks],
            "has_plus_one": self.has_plus_one,
            "has_minus_one": self.has_minus_one,
            "similarity_seed": self.similarity_seed,
            "distinct_required": self.distinct_required,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpectrumSpec":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise SpecError("spectrum spec must be an object with a 'kind' field")
        blocks = tuple(
            (b["c"], b.get("s_sign", 1)) for b in obj.get("rotation_blocks", ())
        )
        return cls(
            kind=obj["kind"],
            eigenvalues=tuple(obj.get("eigenvalues", ())),
            rotation_blocks=blocks,
            has_plus_one=bool(obj.get("has_plus_one", False)),
            has_minus_one=bool(obj.get("has_minus_one", False)),
            similarity_seed=obj.get("similarity_seed"),
            distinct_required=bool(obj.get("distinct_required", False)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "SpectrumSpec":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class EigenData:
    """Exact eigenstructure of a generated matrix.

    ``points`` are the complex eigenvalues with multiplicity, ``u`` the
    orthogonal similarity mapping block coordinates to ambient ones,
    ``blocks`` the coordinate index groups in construction order ([-1]
    first if present, then rotation blocks as specified, then [1]), and
    ``block_reals`` the real part attached to each block.
    """

    spec: SpectrumSpec
    matrix: Matrix
    points: np.ndarray
    u: np.ndarray
    blocks: tuple[tuple[int, ...], ...]
    block_reals: tuple[float, ...]

    @property
    def real_eigenvalues(self) -> np.ndarray:
        return np.real(self.points)

    def coords(self, v: np.ndarray) -> np.ndarray:
        """Coordinates of v in the block (eigen) basis."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.matrix.n,):
            raise DimensionMismatchError("vector length does not match matrix size")
        return self.u.T @ v

    def block_norms(self, v: np.ndarray) -> np.ndarray:
        c = self.coords(v)
        return np.array([np.linalg.norm(c[list(idx)]) for idx in self.blocks])


def _random_orthogonal(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    # Fix signs so the factorization is unique and the result deterministic.
    q = q * np.sign(np.diag(r))
    return q


def make_matrix(spec: SpectrumSpec):
    """Build the matrix described by ``spec`` together with its eigen data."""
    n = spec.n
    g = np.zeros((n, n))
    blocks: list[tuple[int, ...]] = []
    block_reals: list[float] = []
    points: list[complex] = []
    pos = 0
    if spec.kind in ("symmetric", "spd"):
        for i, lam in enumerate(spec.eigenvalues):
            g[i, i] = lam
            blocks.append((i,))
            block_reals.append(lam)
            points.append(complex(lam))
    else:
        if spec.has_minus_one:
            g[pos, pos] = -1.0
            blocks.append((pos,))
            block_reals.append(-1.0)
            points.append(complex(-1.0))
            pos += 1
        for c, sg in spec.rotation_blocks:
            s = sg * float(np.sqrt(1.0 - c * c))
            g[pos, pos] = c
            g[pos, pos + 1] = s
            g[pos + 1, pos] = -s
            g[pos + 1, pos + 1] = c
            blocks.append((pos, pos + 1))
            block_reals.append(c)
            points.append(complex(c, abs(s)))
            points.append(complex(c, -abs(s)))
            pos += 2
        if spec.has_plus_one:
            g[pos, pos] = 1.0
            blocks.append((pos,))
            block_reals.append(1.0)
            points.append(complex(1.0))
            pos += 1

    if spec.similarity_seed is not None:
        u = _random_orthogonal(n, spec.similarity_seed)
        a = u @ g @ u.T
    else:
        u = np.eye(n)
        a = g

    if spec.kind in ("symmetric", "spd"):
        a = 0.5 * (a + a.T)
        matrix = Matrix(a, is_symmetric=True)
    else:
        sym = bool(np.abs(a - a.T).max() <= 1e-13)
        matrix = Matrix(a, is_symmetric=sym, is_orthogonal=True)
    eigendata = EigenData(
        spec=spec,
        matrix=matrix,
        points=np.asarray(points, dtype=complex),
        u=u,
        blocks=tuple(blocks),
        block_reals=tuple(block_reals),
    )
    return matrix, eigendata


def zero_in_fov(spec: SpectrumSpec) -> bool:
    """Whether zero lies in the field of values of the spec's matrix.

    For a normal matrix the field of values is the convex hull of the
    eigenvalues; for a conjugate-symmetric eigenvalue set the hull contains
    zero exactly when the real parts do not all share a strict sign.
    """
    if spec.kind != "orthogonal":
        raise SpecError("zero_in_fov is defined for orthogonal specs only")
    reals = [c for c, _ in spec.rotation_blocks]
    if spec.has_plus_one:
        reals.append(1.0)
    if spec.has_minus_one:
        reals.append(-1.0)
    return not (all(r > 0.0 for r in reals) or all(r < 0.0 for r in reals))


def random_unit_start(
    n: int,
    seed: int,
    eigendata: EigenData | None = None,
    min_grade: int | None = None,
    nonzero_blocks=None,
) -> np.ndarray:
    """Seeded random unit start vector satisfying grade and block constraints.

    Samples standard normal coordinates, resamples until every block listed
    in ``nonzero_blocks`` keeps norm >= 0.01 after normalization and the
    grade reaches ``min_grade``, and gives up after 100 attempts.
    """
    if eigendata is not None and eigendata.matrix.n != n:
        raise DimensionMismatchError("eigendata size does not match n")
    if (min_grade is not None or nonzero_blocks) and eigendata is None:
        raise PreconditionError("grade and block constraints need eigendata")
    wanted = tuple(nonzero_blocks) if nonzero_blocks else ()
    for b in wanted:
        if not 0 <= b < len(eigendata.blocks):
            raise SpecError(f"block index {b} out of range")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        nu = rng.standard_normal(n)
        nu /= np.linalg.norm(nu)
        if wanted:
            norms = [np.linalg.norm(nu[list(eigendata.blocks[b])]) for b in wanted]
            if min(norms) < 0.01:
                continue
        v = eigendata.u @ nu if eigendata is not None else nu
        v /= np.linalg.norm(v)
        if min_grade is not None and grade(eigendata.matrix, v) < min_grade:
            continue
        return v
    raise PreconditionError("start constraints unsatisfiable after 100 resamples")
