"""Graded algebras and modules over the two-element field.

Algebras are monomial quotients of polynomial rings: each generator ``g``
carries a degree and a height ``h`` with ``g^(h+1) = 0``.  Exterior
generators have height 1, ``F2[u]/(u^(n+1))`` has one generator of height n.
Because there are no signs over F2, the exterior algebra is the height-1 case.

Elements of an algebra are frozensets of exponent tuples and elements of a
module are frozensets of basis indices; addition is symmetric difference.

Relative cup-length is computed two ways: by exhaustive breadth-first search
over iterated generator actions, and by the closed-form rules recorded when a
model is built (free cyclic module: sum of heights plus one; tensor product:
sum minus one; suspension: unchanged).  Tests compare the two.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

Monomial = tuple
Element = frozenset


@dataclass(frozen=True)
class Generator:
    name: str
    degree: int
    height: int = 1

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("generators must have positive degree")
        if self.height < 1:
            raise ValueError("generator height must be at least 1")


class GradedAlgebra:
    """Monomial algebra ``F2[g_1, ..., g_r] / (g_i^(h_i + 1))``.

    Parameters
    ----------
    generators : sequence of Generator
    top_degree : int, optional
        Products of degree above this vanish as well.
    """

    def __init__(self, generators, top_degree: int | None = None, name: str = ""):
        self.generators = tuple(generators)
        names = [g.name for g in self.generators]
        if len(set(names)) != len(names):
            raise ValueError("generator names must be distinct")
        self.top_degree = top_degree
        self.name = name
        ranges = [range(g.height + 1) for g in self.generators]
        self.basis = [e for e in itertools.product(*ranges) if self._admissible(e)]

    # monomials ---------------------------------------------------------------

    def degree(self, e: Monomial) -> int:
        return sum(k * g.degree for k, g in zip(e, self.generators))

    def _admissible(self, e: Monomial) -> bool:
        if any(k > g.height for k, g in zip(e, self.generators)):
            return False
        return self.top_degree is None or self.degree(e) <= self.top_degree

    @property
    def unit(self) -> Element:
        return frozenset([(0,) * len(self.generators)])

    def generator(self, name: str) -> Element:
        idx = [g.name for g in self.generators].index(name)
        e = [0] * len(self.generators)
        e[idx] = 1
        return frozenset([tuple(e)])

    def multiply_monomials(self, a: Monomial, b: Monomial):
        e = tuple(i + j for i, j in zip(a, b))
        return e if self._admissible(e) else None

    def multiply(self, a: Element, b: Element) -> Element:
        out: set = set()
        for ma in a:
            for mb in b:
                e = self.multiply_monomials(ma, mb)
                if e is not None:
                    out ^= {e}
        return frozenset(out)

    def add(self, a: Element, b: Element) -> Element:
        return a ^ b

    def positive_basis(self):
        return [e for e in self.basis if self.degree(e) > 0]

    def __repr__(self):
        gens = ", ".join(f"{g.name}:{g.degree}^{g.height}" for g in self.generators)
        return f"GradedAlgebra({self.name or gens})"


def exterior_algebra(names, degree: int = 1, name: str = "") -> GradedAlgebra:
    return GradedAlgebra([Generator(s, degree, 1) for s in names], name=name)


def truncated_polynomial(gen: str, degree: int, height: int, name: str = "") -> GradedAlgebra:
    return GradedAlgebra([Generator(gen, degree, height)], name=name)


def tensor_algebra(A: GradedAlgebra, B: GradedAlgebra) -> GradedAlgebra:
    gens = list(A.generators)
    taken = {g.name for g in gens}
    for g in B.generators:
        new = g.name
        while new in taken:
            new += "'"
        taken.add(new)
        gens.append(Generator(new, g.degree, g.height))
    top = None
    if A.top_degree is not None and B.top_degree is not None:
        top = A.top_degree + B.top_degree
    return GradedAlgebra(gens, top, name=f"{A.name}*{B.name}" if A.name and B.name else "")


def cup_length(A: GradedAlgebra) -> int:
    """Longest nonzero product of positive-degree elements (exhaustive).

    Every element is a sum of monomials, so a nonzero product of k elements
    contains a nonzero product of k monomials, which in turn factors into at
    least k generators.  Searching over products of generators is therefore
    exhaustive.
    """
    gens = [A.generator(g.name) for g in A.generators]
    level = {next(iter(A.unit))}
    k = 0
    while True:
        nxt = set()
        for m in level:
            for g in gens:
                e = A.multiply_monomials(m, next(iter(g)))
                if e is not None:
                    nxt.add(e)
        if not nxt:
            return k
        level, k = nxt, k + 1


def cup_length_closed_form(A: GradedAlgebra) -> int:
    """Sum of generator heights; valid when no top-degree truncation applies."""
    if A.top_degree is not None:
        raise ValueError("closed form needs an algebra without top-degree truncation")
    return sum(g.height for g in A.generators)


# ---------------------------------------------------------------------------
# modules
# ---------------------------------------------------------------------------


@dataclass
class GradedModule:
    """Finite graded module over a :class:`GradedAlgebra`.

    ``action[i][b]`` is the element ``g_i . basis[b]`` as a frozenset of
    basis indices.  ``rcl_closed_form`` records the value predicted by the
    construction rules, or ``None`` if unknown.
    """

    algebra: GradedAlgebra
    basis: list
    action: list
    name: str = ""
    rcl_closed_form: int | None = None

    def __post_init__(self):
        if len(self.action) != len(self.algebra.generators):
            raise ValueError("one action table per generator is required")
        for table in self.action:
            if len(table) != len(self.basis):
                raise ValueError("action table does not match the basis")

    @property
    def is_zero(self) -> bool:
        return not self.basis

    def degrees(self) -> list[int]:
        return [d for _, d in self.basis]

    def ranks(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for _, d in self.basis:
            out[d] = out.get(d, 0) + 1
        return dict(sorted(out.items()))

    def act_generator(self, i: int, x: Element) -> Element:
        out: set = set()
        for b in x:
            out ^= self.action[i][b]
        return frozenset(out)

    def act(self, a: Element, x: Element) -> Element:
        """Action of an algebra element on a module element."""
        out: set = set()
        for mono in a:
            y = x
            for i, k in enumerate(mono):
                for _ in range(k):
                    y = self.act_generator(i, y)
            out ^= y
        return frozenset(out)

    def validate(self) -> None:
        """Check grading, commutativity of the generator actions and the
        height relations.  Raises ``ValueError`` on the first failure."""
        gens = self.algebra.generators
        for i, g in enumerate(gens):
            for b, (_, d) in enumerate(self.basis):
                for c in self.action[i][b]:
                    if self.basis[c][1] != d + g.degree:
                        raise ValueError(f"action of {g.name} breaks the grading")
        for b in range(len(self.basis)):
            x = frozenset([b])
            for i, j in itertools.combinations(range(len(gens)), 2):
                if self.act_generator(i, self.act_generator(j, x)) != \
                        self.act_generator(j, self.act_generator(i, x)):
                    raise ValueError("generator actions do not commute")
            for i, g in enumerate(gens):
                y = x
                for _ in range(g.height + 1):
                    y = self.act_generator(i, y)
                if y:
                    raise ValueError(f"{g.name}^{g.height + 1} acts nontrivially")


def zero_module(A: GradedAlgebra) -> GradedModule:
    return GradedModule(A, [], [[] for _ in A.generators], "zero", 0)


def free_cyclic_module(A: GradedAlgebra, shift: int = 0, name: str = "") -> GradedModule:
    """``A`` as a module over itself with degrees raised by ``shift``."""
    index = {e: i for i, e in enumerate(A.basis)}
    basis = [(e, A.degree(e) + shift) for e in A.basis]
    action = []
    for g in A.generators:
        ge = next(iter(A.generator(g.name)))
        row = []
        for e in A.basis:
            prod = A.multiply_monomials(ge, e)
            row.append(frozenset() if prod is None else frozenset([index[prod]]))
        action.append(row)
    closed = sum(g.height for g in A.generators) + 1 if A.top_degree is None else None
    return GradedModule(A, basis, action, name, closed)


def relative_cup_length(M: GradedModule) -> int:
    """Exhaustive relative cup-length.

    Level 1 holds the nonzero basis elements (candidate alpha_0); level k+1
    holds every nonzero ``g . x`` with ``g`` a generator and ``x`` in level k.
    A nonzero ``(beta_1 ... beta_{k-1}) . alpha_0`` expands to a nonzero
    ``m . b`` with m a monomial of at least k-1 generator factors and b a
    basis element, so the deepest nonempty level is the answer.
    """
    if M.is_zero:
        return 0
    level = {frozenset([b]) for b in range(len(M.basis))}
    k = 1
    while True:
        nxt = set()
        for x in level:
            for i in range(len(M.algebra.generators)):
                y = M.act_generator(i, x)
                if y:
                    nxt.add(y)
        if not nxt:
            return k
        level, k = nxt, k + 1


def relative_cup_length_closed_form(M: GradedModule) -> int:
    if M.rcl_closed_form is None:
        raise ValueError(f"no closed form recorded for module {M.name!r}")
    return M.rcl_closed_form


def tensor_product(M1: GradedModule, M2: GradedModule) -> GradedModule:
    """Kunneth model: basis pairs, each factor's algebra acting on its slot."""
    A = tensor_algebra(M1.algebra, M2.algebra)
    name = f"{M1.name} x {M2.name}"
    if M1.is_zero or M2.is_zero:
        M = zero_module(A)
        M.name = name
        return M
    n2 = len(M2.basis)
    basis = [((b1, b2), d1 + d2) for (b1, d1), (b2, d2) in itertools.product(M1.basis, M2.basis)]
    action = []
    for table in M1.action:
        action.append([frozenset(c * n2 + j for c in table[i]) for i in range(len(M1.basis))
                       for j in range(n2)])
    for table in M2.action:
        action.append([frozenset(i * n2 + c for c in table[j]) for i in range(len(M1.basis))
                       for j in range(n2)])
    closed = None
    if M1.rcl_closed_form is not None and M2.rcl_closed_form is not None:
        closed = M1.rcl_closed_form + M2.rcl_closed_form - 1
    return GradedModule(A, basis, action, name, closed)


def suspend(M: GradedModule, N: int) -> GradedModule:
    """Shift every degree up by ``N``; the action table is reused."""
    if N < 0:
        raise ValueError("suspension dimension must be non-negative")
    if N == 0:
        return M
    basis = [(label, d + N) for label, d in M.basis]
    return GradedModule(M.algebra, basis, M.action, f"S^{N} {M.name}", M.rcl_closed_form)


def restrict(M: GradedModule, names) -> GradedModule:
    """Module over the subalgebra generated by the named generators."""
    keep = [i for i, g in enumerate(M.algebra.generators) if g.name in set(names)]
    A = GradedAlgebra([M.algebra.generators[i] for i in keep], M.algebra.top_degree)
    return GradedModule(A, M.basis, [M.action[i] for i in keep], f"{M.name}|{','.join(names)}")


# ---------------------------------------------------------------------------
# model library and index data
# ---------------------------------------------------------------------------


def torus_model(m: int, shift: int = 0) -> GradedModule:
    """Free rank-one module over H*(T^{2m}) = Lambda(a_1, ..., a_{2m})."""
    A = exterior_algebra([f"a{i + 1}" for i in range(2 * m)], name=f"H*(T^{2 * m})")
    return free_cyclic_module(A, shift, f"torus {m}")


def projective_model(n: int, shift: int = 0) -> GradedModule:
    """Free rank-one module over H*(CP^n) = F2[u]/(u^{n+1}), deg u = 2."""
    if n == 0:
        A = GradedAlgebra([], name="H*(CP^0)")
    else:
        A = truncated_polynomial("u", 2, n, name=f"H*(CP^{n})")
    return free_cyclic_module(A, shift, f"proj {n}")


def sphere_model(d: int) -> GradedModule:
    """F2 in degree d over H*(S^d) with the positive class acting by zero."""
    A = exterior_algebra(["s"], degree=d, name=f"H*(S^{d})")
    return GradedModule(A, [("pt", d)], [[frozenset()]], f"sphere {d}", 1)


def product_model(m: int, n: int) -> GradedModule:
    M = tensor_product(torus_model(m), projective_model(n))
    M.name = f"product {m} {n}"
    return M


def model(name: str) -> GradedModule:
    """Build a model from ``"torus m"``, ``"proj n"``, ``"sphere d"``,
    ``"product m n"`` or ``"zero"``."""
    parts = name.split()
    if not parts:
        raise ValueError("empty model name")
    kind, args = parts[0].lower(), parts[1:]
    try:
        nums = [int(a) for a in args]
    except ValueError as exc:
        raise ValueError(f"bad model arguments in {name!r}") from exc
    if any(v < 0 for v in nums):
        raise ValueError("model arguments must be non-negative")
    if kind == "zero" and not nums:
        return zero_module(GradedAlgebra([]))
    if kind == "torus" and len(nums) == 1:
        return torus_model(nums[0])
    if kind == "proj" and len(nums) == 1:
        return projective_model(nums[0])
    if kind == "sphere" and len(nums) == 1 and nums[0] >= 1:
        return sphere_model(nums[0])
    if kind == "product" and len(nums) == 2:
        return product_model(*nums)
    raise ValueError(f"unknown model {name!r}")


@dataclass
class IndexReport:
    """Homological Conley index data with the rest-point bound it implies."""

    ranks: dict = field(default_factory=dict)
    rcl: int = 0
    lower_bound: int = 0
    name: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "ranks": {str(k): v for k, v in self.ranks.items()},
                "rcl": self.rcl, "lower_bound": self.lower_bound}


def index_report(M: GradedModule) -> IndexReport:
    r = relative_cup_length(M)
    return IndexReport(M.ranks(), r, r, M.name)


def hyperbolic_conley_index(eigen_signs) -> IndexReport:
    """Index of the rest point 0 of x' = A x for A with the given eigenvalue signs.

    The index pair (B^k x B^{n-k}, S^{k-1} x B^{n-k}) has the reduced homology
    of S^k, with k the number of positive signs.
    """
    signs = list(eigen_signs)
    if any(s not in (1, -1) for s in signs):
        raise ValueError("eigenvalue signs must be +1 or -1 (hyperbolic rest point)")
    k = sum(1 for s in signs if s == 1)
    return IndexReport({k: 1}, 1, 1, f"hyperbolic {k}/{len(signs)}")


def theorem2_bound(M) -> int:
    """Lower bound on rest points of a gradient flow with index data ``M``.

    ``M`` may be a :class:`GradedModule` or a model name.
    """
    if isinstance(M, str):
        M = model(M)
    return relative_cup_length(M)
