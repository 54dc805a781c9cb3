import numpy as np
import pytest

from measureproj.experiments import random_blob_measure
from measureproj.measure import DiscreteMeasure, ValidationError, from_image
from measureproj.quantize import (cell_masses, cube_quantize, quantizer_bound,
                                  rounding_recursion, serpentine_order)
from measureproj.transport import consolidate, w1_1d, w1_exact


def adjacent(a, b):
    return sum(abs(x - y) for x, y in zip(a, b)) == 1


def test_serpentine_2x2():
    part = serpentine_order(2, 2)
    assert part.order == ((0, 0), (1, 0), (1, 1), (0, 1))


def test_serpentine_1d():
    assert serpentine_order(3, 1).order == ((0,), (1,), (2,))


@pytest.mark.parametrize("C,d", [(3, 2), (4, 2), (2, 3), (3, 3), (5, 1)])
def test_serpentine_visits_all_cells_adjacently(C, d):
    part = serpentine_order(C, d)
    assert len(set(part.order)) == C ** d
    for a, b in zip(part.order, part.order[1:]):
        assert adjacent(a, b)


def test_serpentine_validation():
    with pytest.raises(ValidationError):
        serpentine_order(0, 2)


def test_rounding_recursion_conserves_mass():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(2, 40))
        masses = rng.random(n)
        masses /= masses.sum()
        N = int(rng.integers(1, 300))
        counts, trace = rounding_recursion(masses, N)
        assert counts.sum() == N
        assert counts.min() >= 0
        for step in trace:
            assert abs(step.sum() - 1.0) < 1e-12


def test_rounding_exact_when_already_integer():
    masses = np.array([0.25, 0.25, 0.25, 0.25])
    counts, _ = rounding_recursion(masses, 8)
    assert counts.tolist() == [2, 2, 2, 2]


def test_quantize_delta_lands_in_second_cell():
    target = DiscreteMeasure([[0.5]], [1.0])
    out = cube_quantize(target, 2)
    assert np.allclose(out.points, 0.75)
    assert abs(w1_1d(consolidate(out), target) - 0.25) < 1e-12


def test_quantize_exact_on_center_supported_uniform():
    for N, d in [(9, 2), (8, 1), (27, 3)]:
        C = round(N ** (1 / d))
        part = serpentine_order(C, d)
        target = DiscreteMeasure(part.centers, np.full(C ** d, 1.0 / C ** d))
        out = consolidate(cube_quantize(target, N))
        w1, _ = w1_exact(out, target, "l2")
        assert w1 == 0.0


def test_quantize_output_shape_and_mass():
    rng = np.random.default_rng(1)
    for N in (1, 5, 37, 100):
        target = random_blob_measure(2, rng)
        out = cube_quantize(target, N)
        assert out.n == N
        assert np.allclose(out.weights, 1.0 / N)
        assert abs(out.weights.sum() - 1.0) < 1e-12


def test_guarantee_value_n100_d2():
    assert abs(quantizer_bound(100, 2) - (np.sqrt(2) / 2 + 1) / 9) < 1e-12
    rng = np.random.default_rng(2)
    for _ in range(5):
        target = random_blob_measure(2, rng)
        out = consolidate(cube_quantize(target, 100))
        w1, _ = w1_exact(out, target, "l2")
        assert w1 <= quantizer_bound(100, 2)


@pytest.mark.parametrize("d", [1, 2])
def test_bound_holds_on_random_targets(d):
    rng = np.random.default_rng(3)
    for N in (4, 16, 64):
        for _ in range(8):
            target = random_blob_measure(d, rng)
            out = consolidate(cube_quantize(target, N))
            if d == 1:
                w1 = w1_1d(out, target)
            else:
                w1, _ = w1_exact(out, target, "l2")
            assert w1 <= quantizer_bound(N, d) + 1e-12


def test_grid_density_targets_supported():
    rng = np.random.default_rng(4)
    img = 0.1 + 0.9 * rng.random((16, 16))
    target = from_image(img)
    out = cube_quantize(target, 64)
    assert out.n == 64
    part = serpentine_order(8, 2)
    masses = cell_masses(target, part)
    assert abs(masses.sum() - 1.0) < 1e-9


def test_jitter_spreads_repeats_within_half_cell():
    target = DiscreteMeasure([[0.5, 0.5]], [1.0])
    plain = cube_quantize(target, 16)
    assert len(np.unique(plain.points, axis=0)) == 1
    jit = cube_quantize(target, 16, jitter=0.1, seed=5)
    C = 4
    center = plain.points[0]
    assert np.abs(jit.points - center).max() <= 0.5 / C + 1e-12


def test_quantize_validation():
    with pytest.raises(ValidationError):
        cube_quantize(DiscreteMeasure([[0.5]], [1.0]), 0)
    bad = DiscreteMeasure([[0.5]], [0.7], probability=False)
    with pytest.raises(ValidationError):
        cube_quantize(bad, 4)
