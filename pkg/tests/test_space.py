"""LR spaces: generation, order independence, partition of unity, rank."""
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import apply_splits, key_of, random_pipeline_space
from lrbsplines.dyadic import dyadic
from lrbsplines.mesh import Split, make_initial_mesh
from lrbsplines.space import (
    LRSpace,
    SpaceError,
    apply_split,
    collocation_rank,
    element_support_count,
    evaluate_space,
    initial_space,
    is_locally_linearly_independent,
    partition_of_unity_defect,
    structured_refine,
)


def test_initial_space_is_the_tensor_basis():
    space = initial_space(make_initial_mesh((0, 1, 0, 1), (2, 2), 4))
    assert space.n_functions == 36
    assert all(b.weight == Fraction(1) for b in space.functions.values())
    single = initial_space(make_initial_mesh((0, 1, 0, 1), (3, 2), 1))
    assert single.n_functions == (3 + 1) * (2 + 1)


def test_initial_space_requires_tensor_mesh(running_example):
    with pytest.raises(SpaceError):
        initial_space(running_example["structured_1"].mesh)


def test_apply_split_refines_crossed_functions():
    space = initial_space(make_initial_mesh((0, 1, 0, 1), (2, 2), 2))
    refined = apply_split(space, Split.make(1, 0.25, 0, 0.5))
    assert refined.n_functions == space.n_functions + 1
    assert refined.mesh != space.mesh


def test_apply_split_rejects_line_that_refines_nothing():
    space = initial_space(make_initial_mesh((0, 1, 0, 1), (2, 2), 4))
    # this quarter-height piece is a legal mesh insertion but covers no
    # crossing function's full height
    with pytest.raises(SpaceError):
        apply_split(space, Split.make(1, dyadic(1, 3), 0.25, 0.5))


def test_structured_refinement_of_one_function(running_example):
    space = running_example["structured_1"]
    assert space.n_functions == 63
    assert len(space.mesh.elements()) == 43
    mesh = space.mesh
    # the inserted net: midlines of the marked function's knot spans,
    # spanning its full support
    for x in (0.125, 0.375, 0.625):
        runs = mesh.runs_at(1, dyadic(x))
        assert runs == ((dyadic(0.25), dyadic(1), 1),)
    for y in (0.375, 0.625, 0.875):
        runs = mesh.runs_at(2, dyadic(y))
        assert runs == ((dyadic(0), dyadic(0.75), 1),)


def test_second_structured_stage_loses_local_independence(running_example):
    space = running_example["structured_2"]
    assert space.n_functions == 78
    assert len(space.mesh.elements()) == 70
    assert not is_locally_linearly_independent(space)
    counts = [
        element_support_count(space, e) for e in space.mesh.elements()
    ]
    assert max(counts) == 14


def test_structured_refine_empty_marker_raises():
    space = initial_space(make_initial_mesh((0, 1, 0, 1), (2, 2), 2))
    with pytest.raises((SpaceError, ValueError)):
        structured_refine(space, [])


def test_generation_is_insertion_order_independent():
    rng = random.Random(23)
    for _ in range(12):
        base = initial_space(make_initial_mesh((0, 1, 0, 1), (2, 2), 2))
        # a compatible batch: dyadic quarters across distinct rows/columns
        splits = []
        for pos, lo, hi in (
            (0.25, 0, 0.5),
            (0.25, 0.5, 1),
            (0.75, 0, 1),
            (0.125, 0, 0.5),
        ):
            splits.append(Split.make(1, pos, lo, hi))
            splits.append(Split.make(2, pos, lo, hi))
        order_a = splits[:]
        order_b = splits[:]
        rng.shuffle(order_a)
        rng.shuffle(order_b)

        def fold(order):
            space = base
            pending = list(order)
            # apply in any feasible order: skip lines whose span is not
            # yet anchored and retry after others create the corners
            for _ in range(len(pending) ** 2 + 1):
                if not pending:
                    break
                nxt = []
                for s in pending:
                    try:
                        space = apply_split(space, s)
                    except Exception:
                        nxt.append(s)
                pending = nxt
            assert not pending, "some splits never became applicable"
            return space

        sa = fold(order_a)
        sb = fold(order_b)
        assert sa.mesh == sb.mesh
        assert sa.functions.keys() == sb.functions.keys()
        for key in sa.functions:
            assert sa.functions[key].weight == sb.functions[key].weight


def test_pipeline_spaces_have_nine_functions_per_element(running_example):
    for name in ("pipeline_1", "pipeline_2"):
        space = running_example[name]
        for element in space.mesh.elements():
            assert element_support_count(space, element) == 9
        assert is_locally_linearly_independent(space)
        assert all(b.weight == Fraction(1) for b in space.functions.values())


def test_pipeline_stage_function_counts(running_example):
    assert running_example["pipeline_1"].n_functions == 69
    assert running_example["pipeline_2"].n_functions == 114


def test_weighted_partition_of_unity_everywhere():
    for seed in (0, 1, 2):
        space = random_pipeline_space(seed, iterations=2)
        assert partition_of_unity_defect(space, samples=40, use_weights=True) <= 1e-12


def test_unweighted_partition_only_after_expansion(running_example):
    dependent = running_example["structured_2"]
    independent = running_example["pipeline_2"]
    assert partition_of_unity_defect(dependent, use_weights=True) <= 1e-12
    assert partition_of_unity_defect(dependent, use_weights=False) > 0.1
    assert partition_of_unity_defect(independent, use_weights=False) <= 1e-12


def test_collocation_rank_full_on_independent_space(running_example):
    space = running_example["pipeline_1"]
    assert collocation_rank(space) == space.n_functions


def test_rank_deficient_fixture_has_defect_one(rank_deficient_space):
    space = rank_deficient_space
    assert space.n_functions == 60
    assert len(space.mesh.elements()) == 39
    assert collocation_rank(space) == space.n_functions - 1


def test_evaluate_space_reproduces_polynomials_on_tensor_space():
    space = initial_space(make_initial_mesh((0, 1, 0, 1), (2, 2), 4))
    # Greville interpolation of a biquadratic is exact; sample agreement
    from lrbsplines.quasi import lr_qi

    def g(x, y):
        return (1 + 2 * x - y) ** 2 * 0.125 + x * y

    coeffs = lr_qi(space, g)
    xs = np.linspace(0, 1, 33)
    ys = np.linspace(0, 1, 29)
    vals = evaluate_space(space, coeffs, xs, ys)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    assert np.max(np.abs(vals - g(gx, gy))) <= 1e-12
