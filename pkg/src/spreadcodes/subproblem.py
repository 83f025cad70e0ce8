"""Exact block updates: the objective restricted to a subset of free chips.

With every chip outside ``S`` held at its current value, each retained
correlation ``(x^i ⋆ x^j)_k`` is an affine function of the free chips and of
products of pairs of free chips::

    value = constant + sum_a lin[a] * x_a + sum_{a<b} bil[a, b] * x_a * x_b

A product ``x^i_s x^j_{s+k}`` is bilinear when both chips are free, linear
(coefficient = the fixed partner chip) when exactly one is free, and
constant otherwise.  The restricted objective is the sum of squared values
of the retained terms.  For ±1 variables the product of two chips is
determined by the chips themselves, so no auxiliary product variables or
linking inequalities are introduced; the solvers below work on this
quadratic form directly.

Two exact solvers are provided: plain enumeration of all ``2^|S|`` sign
patterns, and a depth-first branch-and-bound on the multilinear expansion
of the objective.  Both return the same optimum and break ties towards the
lexicographically smallest assignment (in ``free_bits`` order, -1 < +1).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import CodeFamily, IndexSet, acz_parameter
from .correlation import CorrelationTable

__all__ = [
    "STAGE_ONE",
    "STAGE_TWO",
    "InfeasibleError",
    "PartialProblem",
    "SolveResult",
    "build_partial",
    "evaluate",
    "evaluate_many",
    "multilinear_form",
    "solve_exhaustive",
    "solve_branch_and_bound",
    "solve",
    "dump_problem",
    "ENUMERATION_CAP",
]

STAGE_ONE = "stage_one"
STAGE_TWO = "stage_two"
ENUMERATION_CAP = 20


class InfeasibleError(RuntimeError):
    """No assignment of the free chips satisfies the ACZ constraints."""


@dataclass(eq=False)
class PartialProblem:
    n: int
    m: int
    free_bits: tuple[tuple[int, int], ...]
    mode: str
    g: int
    enforce_acz: bool
    incumbent: np.ndarray          # current ±1 value of each free chip
    term_keys: np.ndarray          # (T, 3) rows (i, j, k), i <= j
    const: np.ndarray              # (T,)
    lin: sp.csr_matrix             # (T, |S|)
    pairs: np.ndarray              # (P, 2) free-chip ids a < b
    bil: sp.csr_matrix             # (T, P)
    offset: int                    # squared values of retained terms that do not depend on S
    acz_columns: tuple[int, ...]
    acz_const: np.ndarray          # (A,)
    acz_lin: np.ndarray            # (A, |S|)
    acz_bil: np.ndarray            # (A, P)
    _poly: tuple | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.free_bits)

    @property
    def n_terms(self) -> int:
        return self.const.shape[0]

    @property
    def active_columns(self) -> tuple[int, ...]:
        return tuple(sorted({i for i, _ in self.free_bits}))

    @property
    def constrained(self) -> bool:
        return self.enforce_acz and self.mode == STAGE_TWO

    def pair_products(self, X: np.ndarray) -> np.ndarray:
        return X[..., self.pairs[:, 0]] * X[..., self.pairs[:, 1]]

    def acz_values(self, X: np.ndarray) -> np.ndarray:
        """Shift-one autocorrelations of the active columns, shape (A, K)."""
        X = np.atleast_2d(X).astype(np.int64)
        Y = self.pair_products(X)
        return self.acz_const[:, None] + self.acz_lin @ X.T + self.acz_bil @ Y.T

    def acz_feasible(self, X: np.ndarray) -> np.ndarray:
        if not self.constrained or not self.acz_columns:
            return np.ones(np.atleast_2d(X).shape[0], dtype=bool)
        return np.all(np.abs(self.acz_values(X)) <= self.g, axis=0)


@dataclass
class SolveResult:
    assignment: np.ndarray
    objective: int
    nodes_explored: int

    def as_updates(self, problem: PartialProblem) -> list[tuple[tuple[int, int], int]]:
        return [(bit, int(v)) for bit, v in zip(problem.free_bits, self.assignment)]


def build_partial(
    family: CodeFamily,
    table: CorrelationTable,
    S: IndexSet,
    mode: str = STAGE_TWO,
    enforce_acz: bool = True,
) -> PartialProblem:
    """Restrict the objective to the free chips ``S`` of ``family``.

    ``stage_one`` keeps only the shift-one autocorrelations of active codes
    and has no constraints; ``stage_two`` keeps every correlation involving
    an active code and, unless ``enforce_acz`` is False, constrains the
    active codes' shift-one autocorrelations to ``[-g, g]``.
    """
    if mode not in (STAGE_ONE, STAGE_TWO):
        raise ValueError(f"unknown mode {mode!r}")
    if len(S) == 0:
        raise ValueError("index set is empty")
    n, m = family.n, family.m
    S.validate(n, m)
    if table.values.shape != (m, m, n):
        raise ValueError("table does not match family dimensions")
    chips = family.chips.astype(np.int64)
    free_bits = S.entries
    B = len(free_bits)
    fid = np.full((n, m), -1, dtype=np.int64)
    for a, (i, r) in enumerate(free_bits):
        fid[r, i] = a
    incumbent = np.array([chips[r, i] for i, r in free_bits], dtype=np.int8)
    active = S.active_columns
    is_active = np.zeros(m, dtype=bool)
    is_active[list(active)] = True

    # retained correlation pairs and their term numbering
    if mode == STAGE_TWO:
        P_, Q_ = np.triu_indices(m)
        keep = is_active[P_] | is_active[Q_]
        pair_p, pair_q = P_[keep], Q_[keep]
        shifts = n
    else:
        pair_p = pair_q = np.array(active, dtype=np.int64)
        shifts = 1
    row_of = np.full((m, m), -1, dtype=np.int64)
    row_of[pair_p, pair_q] = np.arange(pair_p.size)

    def term_id(p, q, k):
        return row_of[p, q] * shifts + (k if shifts > 1 else 0)

    ks = np.arange(n) if mode == STAGE_TWO else np.array([1])
    terms, owners, partners, firsts = [], [], [], []
    for a, (i, r) in enumerate(free_bits):
        # chip is the first factor: term (i, q, k), partner x^q_{r+k}
        qs = np.arange(i, m) if mode == STAGE_TWO else np.array([i])
        q, k = np.meshgrid(qs, ks, indexing="ij")
        q, k = q.ravel(), k.ravel()
        terms.append(term_id(i, q, k))
        owners.append(np.full(q.size, a))
        partners.append(np.stack([q, (r + k) % n], axis=1))
        firsts.append(np.ones(q.size, dtype=bool))
        # chip is the second factor: term (p, i, k), partner x^p_{r-k}
        ps = np.arange(0, i + 1) if mode == STAGE_TWO else np.array([i])
        p, k = np.meshgrid(ps, ks, indexing="ij")
        p, k = p.ravel(), k.ravel()
        terms.append(term_id(p, i, k))
        owners.append(np.full(p.size, a))
        partners.append(np.stack([p, (r - k) % n], axis=1))
        firsts.append(np.zeros(p.size, dtype=bool))
    terms = np.concatenate(terms)
    owners = np.concatenate(owners)
    partners = np.concatenate(partners)
    firsts = np.concatenate(firsts)
    pcol, prow = partners[:, 0], partners[:, 1]
    pid = fid[prow, pcol]
    partner_val = chips[prow, pcol]
    owner_val = incumbent[owners].astype(np.int64)

    is_lin = pid < 0
    # a product of two free chips is recorded once, from its first factor;
    # x_r * x_r (zero-shift autocorrelation) is the constant 1 and is left alone
    is_bil = firsts & (pid >= 0) & (pid != owners)

    T_all = pair_p.size * shifts
    if mode == STAGE_TWO:
        base = table.values[pair_p, pair_q, :].reshape(-1)
    else:
        base = table.values[pair_p, pair_q, 1].copy()
    used = is_lin | is_bil
    removed = np.zeros(T_all, dtype=np.int64)
    np.add.at(removed, terms[used], (owner_val * partner_val)[used])
    const_all = base - removed

    lin_all = sp.csr_matrix(
        (partner_val[is_lin], (terms[is_lin], owners[is_lin])), shape=(T_all, B), dtype=np.int64
    )
    lin_all.sum_duplicates()
    lin_all.eliminate_zeros()

    a_idx = np.minimum(owners[is_bil], pid[is_bil])
    b_idx = np.maximum(owners[is_bil], pid[is_bil])
    pair_key, pair_col = np.unique(a_idx * B + b_idx, return_inverse=True)
    pairs = np.stack([pair_key // B, pair_key % B], axis=1).astype(np.int64).reshape(-1, 2)
    bil_all = sp.csr_matrix(
        (np.ones(pair_col.size, dtype=np.int64), (terms[is_bil], pair_col)),
        shape=(T_all, pairs.shape[0]),
        dtype=np.int64,
    )
    bil_all.sum_duplicates()
    bil_all.eliminate_zeros()

    # ACZ rows come from the full numbering, before constant terms are dropped
    acz_cols = tuple(active) if mode == STAGE_TWO else ()
    if acz_cols:
        acz_rows = np.array([term_id(i, i, 1) for i in acz_cols])
        acz_const = const_all[acz_rows].copy()
        acz_lin = lin_all[acz_rows].toarray()
        acz_bil = bil_all[acz_rows].toarray()
    else:
        acz_const = np.zeros(0, dtype=np.int64)
        acz_lin = np.zeros((0, B), dtype=np.int64)
        acz_bil = np.zeros((0, pairs.shape[0]), dtype=np.int64)

    varying = (np.diff(lin_all.indptr) > 0) | (np.diff(bil_all.indptr) > 0)
    fixed = ~varying
    offset = int(np.dot(const_all[fixed], const_all[fixed]))
    rows = np.flatnonzero(varying)
    if mode == STAGE_TWO:
        keys = np.stack([pair_p[rows // n], pair_q[rows // n], rows % n], axis=1)
    else:
        keys = np.stack([pair_p[rows], pair_q[rows], np.ones_like(rows)], axis=1)

    return PartialProblem(
        n=n,
        m=m,
        free_bits=free_bits,
        mode=mode,
        g=acz_parameter(n),
        enforce_acz=bool(enforce_acz),
        incumbent=incumbent,
        term_keys=keys.astype(np.int64),
        const=const_all[rows],
        lin=lin_all[rows],
        pairs=pairs,
        bil=bil_all[rows],
        offset=offset,
        acz_columns=acz_cols,
        acz_const=acz_const,
        acz_lin=acz_lin,
        acz_bil=acz_bil,
    )


def _check_assignment(problem: PartialProblem, assignment) -> np.ndarray:
    x = np.asarray(assignment, dtype=np.int64)
    if x.shape != (problem.size,):
        raise ValueError(f"assignment must have length {problem.size}, got shape {x.shape}")
    if not np.all(np.abs(x) == 1):
        raise ValueError("assignment entries must be ±1")
    return x


def evaluate(problem: PartialProblem, assignment) -> int:
    """Restricted objective at one ±1 assignment of the free chips."""
    x = _check_assignment(problem, assignment)
    y = problem.pair_products(x)
    v = problem.const + problem.lin @ x + problem.bil @ y
    return problem.offset + int(np.dot(v, v))


def evaluate_many(problem: PartialProblem, X: np.ndarray) -> np.ndarray:
    """Restricted objective for each row of a ``(K, |S|)`` ±1 matrix."""
    X = np.asarray(X, dtype=np.int64)
    Y = problem.pair_products(X)
    V = problem.const[:, None] + problem.lin @ X.T + problem.bil @ Y.T
    return problem.offset + np.einsum("tk,tk->k", V, V)


def _index_to_assignments(idx: np.ndarray, B: int) -> np.ndarray:
    # first free chip is the most significant bit; bit 0 -> -1, bit 1 -> +1
    shifts = np.arange(B - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    return (2 * bits - 1).astype(np.int64)


def solve_exhaustive(problem: PartialProblem, max_bits: int = ENUMERATION_CAP, threads: int = 1) -> SolveResult:
    """Evaluate every sign pattern of the free chips and keep the best feasible one."""
    B = problem.size
    if B > max_bits:
        raise ValueError(f"|S| = {B} exceeds the enumeration cap of {max_bits}")
    total = 1 << B
    chunk = int(max(1, min(total, (1 << 22) // max(problem.n_terms, 1))))
    starts = range(0, total, chunk)
    big = np.iinfo(np.int64).max

    def run(start):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        X = _index_to_assignments(idx, B)
        obj = evaluate_many(problem, X)
        obj = np.where(problem.acz_feasible(X), obj, big)
        best = int(np.argmin(obj))
        return int(obj[best]), int(idx[best])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    obj, index = min(results)
    if obj == big:
        raise InfeasibleError("no assignment of the free chips satisfies ACZ")
    x = _index_to_assignments(np.array([index]), B)[0].astype(np.int8)
    return SolveResult(x, obj, total)


def multilinear_form(problem: PartialProblem) -> tuple[int, np.ndarray, np.ndarray]:
    """Expand the restricted objective into a multilinear polynomial.

    Returns ``(constant, masks, coefs)``: monomial ``t`` is the product of
    the free chips whose bits are set in ``masks[t]``.  Since ``x_a² = 1``,
    the product of two monomials is the monomial of the XOR of their masks.
    Degrees go up to four (squares of bilinear terms).
    """
    if problem._poly is not None:
        return problem._poly
    B = problem.size
    if B > 62:
        raise ValueError("multilinear expansion supports at most 62 free chips")
    c = problem.const.astype(np.int64)
    L = problem.lin.astype(np.int64)
    Q = problem.bil.astype(np.int64)
    bit = np.left_shift(np.int64(1), np.arange(B, dtype=np.int64))
    pmask = bit[problem.pairs[:, 0]] | bit[problem.pairs[:, 1]] if problem.pairs.size else np.zeros(0, np.int64)

    masks, coefs = [], []
    lin = 2 * (L.T @ c)
    masks.append(bit)
    coefs.append(np.asarray(lin).ravel())
    quad = 2 * (Q.T @ c)
    masks.append(pmask)
    coefs.append(np.asarray(quad).ravel())
    for M, left, right in (
        (L.T @ L, bit, bit),
        (2 * (L.T @ Q), bit, pmask),
        (Q.T @ Q, pmask, pmask),
    ):
        M = sp.coo_matrix(M)
        masks.append(left[M.row] ^ right[M.col])
        coefs.append(M.data.astype(np.int64))
    masks = np.concatenate(masks).astype(np.int64)
    coefs = np.concatenate(coefs).astype(np.int64)
    uniq, inv = np.unique(masks, return_inverse=True)
    total = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(total, inv, coefs)
    constant = problem.offset + int(np.dot(c, c))
    if uniq.size and uniq[0] == 0:
        constant += int(total[0])
        uniq, total = uniq[1:], total[1:]
    nz = total != 0
    problem._poly = (constant, uniq[nz], total[nz])
    return problem._poly


def _signs(masks: np.ndarray, neg_mask: int) -> np.ndarray:
    """±1 value of each monomial when the chips in ``neg_mask`` are -1."""
    odd = (np.bitwise_count(masks & np.int64(neg_mask)) & 1).astype(np.int64)
    return 1 - 2 * odd


class _BranchAndBound:
    """Depth-first search over chip signs in a fixed branching order.

    Lower bound at a node: monomials whose chips are all assigned are
    evaluated exactly; monomials with one unassigned chip ``a`` are summed
    into an effective coefficient ``h_a`` and contribute ``-|h_a|``; the
    remaining monomials contribute ``-|c|``.  Nodes are pruned when the bound
    exceeds the best value found, or equals it and no completion could be
    lexicographically smaller than the best assignment.  ACZ rows are pruned
    by interval arithmetic on their affine forms.
    """

    def __init__(self, problem: PartialProblem, node_limit: int | None):
        self.problem = problem
        self.node_limit = node_limit
        self.B = B = problem.size
        constant, masks, coefs = multilinear_form(problem)
        self.constant = constant
        bit = np.left_shift(np.int64(1), np.arange(B, dtype=np.int64))
        member = (masks[:, None] & bit[None, :]) != 0  # (M, B)
        mass = np.abs(coefs) @ member if masks.size else np.zeros(B)
        # heavier chips first; ties by position
        self.order = sorted(range(B), key=lambda a: (-mass[a], a))
        rank = np.empty(B, dtype=np.int64)
        rank[self.order] = np.arange(B)
        # depth at which a monomial becomes fully assigned
        last = np.where(member, rank[None, :], -1).max(axis=1) + 1 if masks.size else np.zeros(0, np.int64)
        self.complete_at = [(masks[last == d], coefs[last == d]) for d in range(B + 1)]
        # monomials with exactly one unassigned chip, and the rest, per depth
        self.single_at = []
        self.rest_at = np.zeros(B + 1, dtype=np.int64)
        assigned_mask = 0
        for d in range(B + 1):
            if d > 0:
                assigned_mask |= int(bit[self.order[d - 1]])
            un = masks & ~np.int64(assigned_mask)
            cnt = np.bitwise_count(un)
            one = cnt == 1
            pos = np.bitwise_count(un[one] - 1).astype(np.int64)
            self.single_at.append((masks[one], coefs[one], pos))
            self.rest_at[d] = int(np.abs(coefs[cnt >= 2]).sum())
        self.bit = [int(b) for b in bit]

        self.constrained = problem.constrained and len(problem.acz_columns) > 0
        if self.constrained:
            self.acz_const = problem.acz_const.astype(np.int64)
            self.acz_lin = problem.acz_lin.astype(np.int64)
            self.acz_bil = problem.acz_bil.astype(np.int64)
            self.abs_lin = np.abs(self.acz_lin)
            self.abs_bil = np.abs(self.acz_bil)
            self.pairs = problem.pairs
            self.g = problem.g

        self.x = np.zeros(B, dtype=np.int64)
        self.assigned = np.zeros(B, dtype=bool)
        self.nodes = 0
        self.best_obj = math.inf
        self.best_x = None

    def acz_possible(self) -> bool:
        x = np.where(self.assigned, self.x, 0)
        pa, pb = self.pairs[:, 0], self.pairs[:, 1]
        y = x[pa] * x[pb]
        fixed = self.acz_const + self.acz_lin @ x + self.acz_bil @ y
        open_pair = ~(self.assigned[pa] & self.assigned[pb])
        slack = self.abs_lin @ (~self.assigned) + self.abs_bil @ open_pair
        return bool(np.all(fixed - slack <= self.g) and np.all(fixed + slack >= -self.g))

    def lex_can_improve(self) -> bool:
        best = self.best_x
        for p in range(self.B):
            if self.assigned[p]:
                if self.x[p] != best[p]:
                    return self.x[p] < best[p]
            elif best[p] == 1:
                return True
        return False

    def run(self) -> SolveResult:
        inc = self.problem.incumbent.astype(np.int64)
        if not self.constrained or bool(self.problem.acz_feasible(inc[None, :])[0]):
            self.best_obj = evaluate(self.problem, inc)
            self.best_x = inc.copy()
        self._search(0, 0, self.constant)
        if self.best_x is None:
            raise InfeasibleError("no assignment of the free chips satisfies ACZ")
        return SolveResult(self.best_x.astype(np.int8), int(self.best_obj), self.nodes)

    def _search(self, depth: int, neg_mask: int, exact: int) -> None:
        self.nodes += 1
        if self.node_limit is not None and self.nodes > self.node_limit:
            raise RuntimeError(f"branch-and-bound node limit {self.node_limit} exceeded")
        cm, cc = self.complete_at[depth]
        if cm.size:
            exact += int(np.dot(cc, _signs(cm, neg_mask)))
        if self.constrained and depth > 0 and not self.acz_possible():
            return
        if depth == self.B:
            if exact < self.best_obj or (
                exact == self.best_obj and tuple(self.x) < tuple(self.best_x)
            ):
                self.best_obj = exact
                self.best_x = self.x.copy()
            return
        sm, sc, spos = self.single_at[depth]
        bound = exact - int(self.rest_at[depth])
        if sm.size:
            vals = sc * _signs(sm, neg_mask)
            h = np.bincount(spos, weights=vals, minlength=self.B)
            bound -= int(np.abs(h).sum())
        if bound > self.best_obj:
            return
        if bound == self.best_obj and not self.lex_can_improve():
            return
        a = self.order[depth]
        first = int(self.problem.incumbent[a])
        self.assigned[a] = True
        for value in (first, -first):
            self.x[a] = value
            self._search(depth + 1, neg_mask | (self.bit[a] if value < 0 else 0), exact)
        self.assigned[a] = False
        self.x[a] = 0


def solve_branch_and_bound(problem: PartialProblem, node_limit: int | None = None) -> SolveResult:
    """Exact minimizer of the restricted objective by branch-and-bound."""
    return _BranchAndBound(problem, node_limit).run()


def solve(problem: PartialProblem, solver: str = "auto", threads: int = 1) -> SolveResult:
    """Dispatch to a solver: ``enum``, ``bnb`` or ``auto`` (enumeration up to 4 chips)."""
    if solver == "auto":
        solver = "enum" if problem.size <= 4 else "bnb"
    if solver == "enum":
        return solve_exhaustive(problem, threads=threads)
    if solver == "bnb":
        return solve_branch_and_bound(problem)
    raise ValueError(f"unknown solver {solver!r}")


def dump_problem(problem: PartialProblem) -> str:
    """Plain-text listing, one term per line: ``i j k | const | id:coef ... | id,id:coef ...``."""
    out = [
        f"# mode {problem.mode} g {problem.g} offset {problem.offset}",
        "# free " + " ".join(f"{a}:{i},{r}" for a, (i, r) in enumerate(problem.free_bits)),
    ]
    lin, bil = problem.lin, problem.bil
    for t, (i, j, k) in enumerate(problem.term_keys):
        ls, le = lin.indptr[t], lin.indptr[t + 1]
        bs, be = bil.indptr[t], bil.indptr[t + 1]
        lin_txt = " ".join(f"{a}:{c}" for a, c in zip(lin.indices[ls:le], lin.data[ls:le]))
        bil_txt = " ".join(
            f"{problem.pairs[p, 0]},{problem.pairs[p, 1]}:{c}"
            for p, c in zip(bil.indices[bs:be], bil.data[bs:be])
        )
        out.append(f"{i} {j} {k} | {problem.const[t]} | {lin_txt} | {bil_txt}")
    return "\n".join(out) + "\n"
