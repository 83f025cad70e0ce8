import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spreadcodes.core import CodeFamily, IndexSet
from spreadcodes.correlation import build_table
from spreadcodes.generators import random_family
from spreadcodes.subproblem import (
    STAGE_ONE,
    STAGE_TWO,
    InfeasibleError,
    build_partial,
    dump_problem,
    evaluate,
    evaluate_many,
    multilinear_form,
    solve,
    solve_branch_and_bound,
    solve_exhaustive,
)
from oracles import brute_block, restricted, with_bits


def _random_block(rng, n, m, size):
    flat = rng.choice(n * m, size=size, replace=False)
    return IndexSet([(int(f) // n, int(f) % n) for f in flat])


def _acz_family(n, m, seed):
    """Random family with ACZ codes, found by rejection per column."""
    rng = np.random.default_rng(seed)
    cols = []
    while len(cols) < m:
        c = rng.choice([-1, 1], size=n)
        if abs(int(c @ np.roll(c, -1))) <= n % 2:
            cols.append(c)
    return CodeFamily(np.stack(cols, axis=1))


def test_single_chip_all_ones_expansion():
    fam = CodeFamily(np.ones((4, 1), dtype=np.int8))
    p = build_partial(fam, build_table(fam), IndexSet([(0, 0)]), STAGE_ONE)
    assert p.term_keys.tolist() == [[0, 0, 1]]
    assert p.const.tolist() == [2] and p.lin.toarray().tolist() == [[2]]
    assert p.bil.shape[1] == 0 and p.offset == 0
    assert evaluate(p, [1]) == 16 and evaluate(p, [-1]) == 0


def test_two_columns_single_bilinear_pair():
    fam = random_family(9, 3, seed=2)
    p = build_partial(fam, build_table(fam), IndexSet([(0, 2), (1, 6)]), STAGE_TWO, enforce_acz=False)
    assert p.pairs.tolist() == [[0, 1]]
    bil = p.bil.toarray()[:, 0]
    hits = {tuple(p.term_keys[t]) for t in np.flatnonzero(bil)}
    assert hits == {(0, 1, 4)}  # shift aligning chip 2 of code 0 with chip 6 of code 1


@pytest.mark.parametrize("mode", [STAGE_ONE, STAGE_TWO])
def test_incumbent_matches_table(mode):
    rng = np.random.default_rng(4)
    for _ in range(20):
        fam = random_family(11, 4, int(rng.integers(2**32)))
        S = _random_block(rng, 11, 4, int(rng.integers(1, 7)))
        p = build_partial(fam, build_table(fam), S, mode)
        assert evaluate(p, p.incumbent) == restricted(fam.chips, S.active_columns, mode)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([STAGE_ONE, STAGE_TWO]), st.integers(1, 6))
def test_evaluate_matches_apply_and_recompute(seed, mode, size):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(3, 10)), int(rng.integers(1, 4))
    size = min(size, n * m)
    fam = random_family(n, m, seed)
    S = _random_block(rng, n, m, size)
    p = build_partial(fam, build_table(fam), S, mode)
    X = rng.choice([-1, 1], size=(8, size))
    values = evaluate_many(p, X)
    for x, v in zip(X, values):
        expected = restricted(with_bits(fam.chips, S.entries, x), S.active_columns, mode)
        assert evaluate(p, x) == v == expected


def test_evaluate_rejects_bad_assignment():
    fam = random_family(5, 2, seed=0)
    p = build_partial(fam, build_table(fam), IndexSet([(0, 0), (1, 1)]))
    with pytest.raises(ValueError):
        evaluate(p, [1])
    with pytest.raises(ValueError):
        evaluate(p, [1, 0])


def test_empty_block_rejected():
    fam = random_family(5, 2, seed=0)
    with pytest.raises(ValueError):
        build_partial(fam, build_table(fam), IndexSet([]))


def test_multilinear_form_reproduces_evaluate():
    rng = np.random.default_rng(8)
    fam = random_family(13, 3, seed=8)
    S = _random_block(rng, 13, 3, 6)
    p = build_partial(fam, build_table(fam), S, STAGE_TWO)
    const, masks, coefs = multilinear_form(p)
    for x in rng.choice([-1, 1], size=(20, 6)):
        neg = sum(1 << a for a in range(6) if x[a] < 0)
        signs = np.array([(-1) ** bin(int(mk) & neg).count("1") for mk in masks], dtype=np.int64)
        assert const + int(coefs @ signs) == evaluate(p, x)


def test_solve_single_chip_picks_better_sign():
    fam = random_family(7, 2, seed=3)
    p = build_partial(fam, build_table(fam), IndexSet([(1, 4)]), STAGE_TWO, enforce_acz=False)
    res = solve_exhaustive(p)
    assert res.objective == min(evaluate(p, [-1]), evaluate(p, [1]))


def test_exhaustive_matches_brute_force_small():
    rng = np.random.default_rng(11)
    for mode in (STAGE_ONE, STAGE_TWO):
        for _ in range(10):
            fam = _acz_family(5, 2, int(rng.integers(2**32)))
            S = _random_block(rng, 5, 2, 4)
            p = build_partial(fam, build_table(fam), S, mode)
            res = solve_exhaustive(p)
            value, assignment = brute_block(fam.chips, S.entries, mode)
            assert res.objective == value and res.assignment.tolist() == list(assignment)
            assert res.objective <= evaluate(p, p.incumbent)


def test_branch_and_bound_agrees_with_enumeration():
    rng = np.random.default_rng(12)
    for _ in range(30):
        n, m = int(rng.choice([15, 31])), int(rng.choice([3, 5]))
        mode = str(rng.choice([STAGE_ONE, STAGE_TWO]))
        fam = _acz_family(n, m, int(rng.integers(2**32)))
        S = _random_block(rng, n, m, int(rng.integers(2, 11)))
        p = build_partial(fam, build_table(fam), S, mode)
        a, b = solve_exhaustive(p), solve_branch_and_bound(p)
        assert a.objective == b.objective
        assert np.array_equal(a.assignment, b.assignment)


def test_infeasible_when_incumbent_violates_acz():
    fam = CodeFamily(np.ones((6, 1), dtype=np.int8))
    p = build_partial(fam, build_table(fam), IndexSet([(0, 0)]), STAGE_TWO)
    with pytest.raises(InfeasibleError):
        solve_exhaustive(p)
    with pytest.raises(InfeasibleError):
        solve_branch_and_bound(p)


def test_enumeration_cap_and_solver_names():
    fam = random_family(31, 2, seed=1)
    S = IndexSet([(0, r) for r in range(21)])
    p = build_partial(fam, build_table(fam), S, STAGE_TWO, enforce_acz=False)
    with pytest.raises(ValueError):
        solve_exhaustive(p)
    with pytest.raises(ValueError):
        solve(p, "simplex")


def test_threaded_enumeration_is_deterministic():
    rng = np.random.default_rng(5)
    fam = _acz_family(31, 4, 5)
    S = _random_block(rng, 31, 4, 12)
    p = build_partial(fam, build_table(fam), S, STAGE_TWO)
    one, four = solve_exhaustive(p, threads=1), solve_exhaustive(p, threads=4)
    assert one.objective == four.objective and np.array_equal(one.assignment, four.assignment)


def test_dump_round_trips_coefficients():
    rng = np.random.default_rng(9)
    fam = random_family(9, 3, seed=9)
    S = _random_block(rng, 9, 3, 4)
    p = build_partial(fam, build_table(fam), S, STAGE_TWO)
    lines = dump_problem(p).splitlines()
    assert lines[0].startswith("# mode stage_two") and lines[1].startswith("# free")
    x = rng.choice([-1, 1], size=4)
    total = p.offset
    for line in lines[2:]:
        _, const, lin, bil = (part.strip() for part in line.split("|"))
        value = int(const)
        for tok in lin.split():
            a, c = tok.split(":")
            value += int(c) * x[int(a)]
        for tok in bil.split():
            ab, c = tok.split(":")
            a, b = ab.split(",")
            value += int(c) * x[int(a)] * x[int(b)]
        total += value * value
    assert total == evaluate(p, x)
