from __future__ import annotations

import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astroimg.errors import ContractError, DegenerateError, ParameterError, SingularityError
from astroimg.morphology import Connectivity
from astroimg.segment import (
    ChanVeseParams,
    MarkerSet,
    chan_vese,
    chan_vese_energy,
    distance_transform,
    markers_from_histogram,
    random_walker,
    split_overlapping,
    watershed,
)
from astroimg.synth import Noise, SynthGalaxySpec, apply_noise, disk_image, disk_pair_mask, synth_galaxy

from . import oracles


def disk_truth(w=64, h=64, r=16):
    return disk_image(w, h, (w / 2, h / 2), r)


# ---------------------------------------------------------------- Chan-Vese


def test_chan_vese_recovers_disk():
    truth = disk_truth()
    res = chan_vese(truth)
    assert np.mean(res.mask == truth) >= 0.99
    assert min(truth.min(), 0) <= res.c2 <= res.c1 <= truth.max()


def test_chan_vese_constant_image():
    res = chan_vese(np.full((20, 20), 0.4))
    assert res.converged and res.iterations_run <= 5
    assert res.c1 == pytest.approx(0.4) and res.c2 == pytest.approx(0.4)
    assert all(math.isfinite(e) for e in res.energy_trace)


def test_chan_vese_energy_trace_monotone_and_recomputable():
    img = synth_galaxy(SynthGalaxySpec(width=64, height=64, scale_length=6, noise=Noise("gauss", 0.05), seed=2))
    res = chan_vese(img)
    trace = res.energy_trace
    assert all(b <= a + 1e-6 * abs(a) for a, b in zip(trace[1:], trace[2:]))
    assert trace[-1] == pytest.approx(chan_vese_energy(img, res.phi), rel=1e-12)
    lines = res.energy_csv().splitlines()
    assert lines[0] == "iteration,energy" and len(lines) == len(trace) + 1


def test_chan_vese_params_validated():
    for bad in (dict(mu=-1.0), dict(lambda1=0.0), dict(dt=0.0), dict(max_iter=0)):
        with pytest.raises(ParameterError):
            ChanVeseParams(**bad)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_chan_vese_means_within_range(seed):
    img = np.random.default_rng(seed).random((16, 16))
    res = chan_vese(img, ChanVeseParams(max_iter=15))
    for c in (res.c1, res.c2):
        assert img.min() <= c <= img.max()
    assert set(np.unique(res.mask)) <= {0, 1}


def test_chan_vese_affine_rescaling_with_lambdas():
    truth = disk_truth(40, 40, 10)
    img = truth + np.random.default_rng(60).normal(0, 0.1, truth.shape)
    base = chan_vese(img)
    a, b = 2.0, 0.25
    scaled = chan_vese(a * img + b, ChanVeseParams(lambda1=1.0 / a**2, lambda2=2.0 / a**2))
    assert np.mean(base.mask == scaled.mask) >= 0.999


# ------------------------------------------------------------ random walker


def _dense_random_walker(img, seeds, beta):
    # independent dense build of the lattice Laplacian
    h, w = img.shape
    norm = (img - img.min()) / (img.max() - img.min())
    n = h * w
    L = np.zeros((n, n))
    for y in range(h):
        for x in range(w):
            for yy, xx in ((y, x + 1), (y + 1, x)):
                if yy < h and xx < w:
                    a, b = y * w + x, yy * w + xx
                    wt = math.exp(-beta * (norm[y, x] - norm[yy, xx]) ** 2)
                    L[a, b] -= wt
                    L[b, a] -= wt
                    L[a, a] += wt
                    L[b, b] += wt
    flat = seeds.ravel()
    U, M = np.flatnonzero(flat == 0), np.flatnonzero(flat > 0)
    out = []
    for lab in sorted(set(flat[M])):
        m = (flat[M] == lab).astype(float)
        x = np.linalg.solve(L[np.ix_(U, U)], -L[np.ix_(U, M)] @ m)
        p = np.zeros(n)
        p[M] = m
        p[U] = x
        out.append(p.reshape(h, w))
    return np.array(out)


def test_random_walker_4x4_matches_dense_solve():
    img = np.zeros((4, 4))
    img[:, 2:] = 1.0
    ms = MarkerSet([(0, 1, 1), (3, 2, 2)])
    labels, probs = random_walker(img, ms, beta=90.0)
    assert np.array_equal(labels, np.where(img > 0, 2, 1))
    assert np.max(np.abs(probs - _dense_random_walker(img, ms.to_array(img.shape), 90.0))) < 1e-6


def test_random_walker_dense_oracle_random_image():
    img = np.random.default_rng(61).random((6, 5))
    ms = MarkerSet([(0, 0, 1), (4, 5, 2), (2, 3, 3)])
    _, probs = random_walker(img, ms, beta=5.0, tol=1e-12)
    assert np.max(np.abs(probs - _dense_random_walker(img, ms.to_array(img.shape), 5.0))) < 1e-8


def test_random_walker_markers_and_sums():
    truth = disk_truth(32, 32, 8)
    ms = MarkerSet([(0, 0, 1), (16, 16, 2), (31, 31, 1)])
    labels, probs = random_walker(truth, ms)
    for x, y, lab in ms.markers:
        assert probs[lab - 1, y, x] == 1.0 and labels[y, x] == lab
    assert np.max(np.abs(probs.sum(axis=0) - 1)) < 1e-6
    assert probs.min() >= 0 and probs.max() <= 1


def test_random_walker_label_flip_permutes_outputs():
    img = np.random.default_rng(62).random((10, 10))
    a = MarkerSet([(0, 0, 1), (9, 9, 2)])
    b = MarkerSet([(0, 0, 2), (9, 9, 1)])
    la, pa = random_walker(img, a, beta=10.0)
    lb, pb = random_walker(img, b, beta=10.0)
    assert np.array_equal(pa, pb[::-1])
    assert np.array_equal(la, 3 - lb)


def test_random_walker_errors():
    img = np.random.default_rng(63).random((6, 6))
    with pytest.raises(ParameterError):
        random_walker(img, MarkerSet([(0, 0, 1), (5, 5, 1)]))
    with pytest.raises(ContractError):
        random_walker(img, MarkerSet([(0, 0, 1), (6, 0, 2)]))
    with pytest.raises(ParameterError):
        random_walker(img, MarkerSet([(0, 0, 1), (5, 5, 2)]), beta=0.0)
    # a zero-weight cut isolates an unmarked island
    barrier = np.zeros((6, 6))
    barrier[:, 3:] = 1.0
    with pytest.raises(SingularityError):
        random_walker(barrier, MarkerSet([(0, 0, 1), (1, 1, 2)]), beta=1e6)


def test_random_walker_threads_identical():
    img = np.random.default_rng(64).random((12, 12))
    ms = MarkerSet([(0, 0, 1), (11, 11, 2), (0, 11, 3)])
    l1, p1 = random_walker(img, ms, threads=1)
    l3, p3 = random_walker(img, ms, threads=3)
    assert np.array_equal(l1, l3) and np.array_equal(p1, p3)


# ---------------------------------------------------------------- markers


def test_histogram_markers_two_tone():
    img = np.zeros((10, 10))
    img[:, 5:] = 1.0
    labels = markers_from_histogram(img, 0.1, 0.9).to_array(img.shape)
    assert np.array_equal(labels, np.where(img > 0, 2, 1))


def test_histogram_markers_errors():
    with pytest.raises(DegenerateError):
        markers_from_histogram(np.full((5, 5), 0.3))
    with pytest.raises(ParameterError):
        markers_from_histogram(np.zeros((5, 5)), 0.6, 0.4)


def test_histogram_markers_noisy_galaxy():
    img = synth_galaxy(SynthGalaxySpec(width=64, height=64, noise=Noise("sp", 0.05), seed=4))
    assert markers_from_histogram(img, 0.05, 0.95).labels == [1, 2]


# ------------------------------------------------------- distance transform


def test_distance_all_foreground_is_inf():
    assert np.all(np.isinf(distance_transform(np.ones((4, 5), dtype=int))))


def test_distance_three_four_five():
    mask = np.ones((6, 6), dtype=int)
    mask[0, 0] = 0
    assert distance_transform(mask)[4, 3] == 5.0  # (x, y) = (3, 4)


@pytest.mark.parametrize("seed", range(5))
def test_distance_matches_brute_force_16x16(seed):
    mask = (np.random.default_rng(seed).random((16, 16)) < 0.8).astype(int)
    assert np.array_equal(distance_transform(mask), oracles.distance_transform(mask))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), h=st.integers(1, 12), w=st.integers(1, 12), p=st.floats(0.3, 0.95))
def test_distance_lipschitz_and_oracle(seed, h, w, p):
    mask = (np.random.default_rng(seed).random((h, w)) < p).astype(int)
    d = distance_transform(mask)
    assert np.array_equal(d, oracles.distance_transform(mask))
    if np.isfinite(d).all():
        assert np.all(np.abs(np.diff(d, axis=0)) <= 1 + 1e-12)
        assert np.all(np.abs(np.diff(d, axis=1)) <= 1 + 1e-12)
        diag = np.abs(d[1:, 1:] - d[:-1, :-1])
        assert np.all(diag <= math.sqrt(2) + 1e-12)


# --------------------------------------------------------------- watershed


def _bfs(shape, start, conn):
    h, w = shape
    dist = np.full(shape, np.inf)
    dist[start] = 0
    q = deque([start])
    while q:
        y, x = q.popleft()
        for yy, xx in oracles.neighbours(y, x, h, w, conn):
            if dist[yy, xx] == np.inf:
                dist[yy, xx] = dist[y, x] + 1
                q.append((yy, xx))
    return dist


@pytest.mark.parametrize("conn", [Connectivity.FOUR, Connectivity.EIGHT])
def test_watershed_flat_relief_geodesic_split(conn):
    shape = (9, 11)
    a, b = (2, 1), (6, 8)
    ms = MarkerSet([(a[1], a[0], 1), (b[1], b[0], 2)])
    labels = watershed(np.zeros(shape), ms, conn)
    da, db = _bfs(shape, a, int(conn)), _bfs(shape, b, int(conn))
    assert np.all(labels[da < db] == 1) and np.all(labels[db < da] == 2)
    assert np.array_equal(labels, watershed(np.zeros(shape), ms, conn))


def test_watershed_single_marker_fills_image():
    labels = watershed(np.random.default_rng(65).random((7, 8)), MarkerSet([(3, 3, 4)]))
    assert np.all(labels == 4)


def test_watershed_v_relief_splits_at_ridge():
    relief = np.array([[1.0, 0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0, 1.0]])
    labels = watershed(relief, MarkerSet([(1, 0, 1), (7, 0, 2)]))
    assert labels[0, :4].tolist() == [1, 1, 1, 1]
    assert labels[0, 5:].tolist() == [2, 2, 2, 2]
    assert labels[0, 4] in (1, 2)


def test_watershed_requires_a_marker():
    with pytest.raises(ParameterError):
        watershed(np.zeros((3, 3)), np.zeros((3, 3), dtype=int))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5), conn=st.sampled_from([Connectivity.FOUR, Connectivity.EIGHT]))
def test_watershed_partition(seed, n, conn):
    rng = np.random.default_rng(seed)
    relief = rng.random((10, 10))
    seeds = np.zeros((10, 10), dtype=int)
    for lab in range(1, n + 1):
        seeds[rng.integers(10), rng.integers(10)] = lab
    labels = watershed(relief, seeds, conn)
    assert labels.min() >= 1 and set(np.unique(labels)) == set(np.unique(seeds[seeds > 0]))
    assert np.array_equal(labels, watershed(relief, seeds, conn))
    for lab in set(np.unique(seeds[seeds > 0])):
        assert np.all(labels[seeds == lab] == lab)


# ------------------------------------------------------ split_overlapping


def test_split_disk_pair_at_bisector():
    mask = disk_pair_mask(64, 48, 10, 14)
    labels, _ = split_overlapping(mask)
    assert sorted(np.unique(labels[mask > 0])) == [1, 2]
    assert np.all((labels > 0) == (mask > 0))
    # centres at x = 25 and x = 39: the bisector is x = 32
    ys, xs = np.nonzero(labels == 1)
    left_max = xs.max()
    ys, xs = np.nonzero(labels == 2)
    right_min = xs.min()
    assert abs(left_max - 32) <= 1 and abs(right_min - 32) <= 1


def test_split_single_disk():
    labels, dist = split_overlapping(disk_image(40, 40, (20, 20), 10).astype(int))
    assert sorted(np.unique(labels)) == [0, 1]
    assert dist.shape == (40, 40)


def test_split_disjoint_disks_are_components():
    mask = (disk_image(60, 30, (15, 15), 8) + disk_image(60, 30, (45, 15), 8)).astype(int)
    labels, _ = split_overlapping(mask)
    assert sorted(np.unique(labels)) == [0, 1, 2]
    assert len(np.unique(labels[:, :30])) == 2 and len(np.unique(labels[:, 30:])) == 2


def test_split_empty_mask():
    with pytest.raises(DegenerateError):
        split_overlapping(np.zeros((5, 5), dtype=int))


def test_salt_and_pepper_random_walker_disk():
    truth = disk_truth()
    noisy = apply_noise(truth, Noise("sp", 0.05), seed=3)
    labels, _ = random_walker(noisy, markers_from_histogram(noisy, 0.05, 0.95))
    assert np.mean((labels == 2) == (truth > 0)) >= 0.95
