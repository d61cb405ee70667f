import math

import numpy as np
import pytest
from hypothesis import given, settings, seed
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from errors import DegenerateGeodesicError, PreconditionError
from geometry.complex_ball import (BallPoint4, ball_automorphism, ball_pseudo_distance, chc2_diffusion_batch,
                                   chc2_diffusion_matrix, complex_to_real, real_to_complex)
from geometry.disk import (DiskAutomorphism, DiskPoint, disk_geodesic, disk_geodesic_distance, hyperbolic_norm,
                           mirror_map, moebius_pseudo_distance)
from geometry.model_spaces import (DISK_PROFILE, CurvatureFamily, CurvatureProfile, ModelSpace,
                                   model_constants)

coordinates = st.floats(min_value=-0.6, max_value=0.6, allow_nan=False)
disk_points = st.tuples(coordinates, coordinates).map(lambda p: complex(*p))
ball_points = arrays(np.float64, 4, elements=st.floats(min_value=-0.49, max_value=0.49, allow_nan=False))


def test_pseudo_distance_examples():
    assert moebius_pseudo_distance(0.5, -0.5) == pytest.approx(0.8, abs=1e-15)
    assert moebius_pseudo_distance(0.3 + 0.4j, 0) == pytest.approx(0.5, abs=1e-15)
    assert moebius_pseudo_distance(DiskPoint(0.2, -0.1), DiskPoint(0.2, -0.1)) == 0.0


def test_points_outside_disk_rejected():
    with pytest.raises(PreconditionError):
        moebius_pseudo_distance(1.0, 0.0)
    with pytest.raises(PreconditionError):
        DiskPoint(0.8, 0.8)
    with pytest.raises(PreconditionError):
        BallPoint4(0.5, 0.5, 0.5, 0.5)


def test_geodesic_distance_against_quadrature():
    for r in (0.1, 0.5, 0.9):
        oracle, _ = quad(lambda s: 2.0 / (1.0 - s * s), 0.0, r, epsabs=1e-14, epsrel=1e-14)
        assert disk_geodesic_distance(0, r) == pytest.approx(oracle, rel=1e-12)
    assert disk_geodesic_distance(0, 0.5) == pytest.approx(math.log(3.0), rel=1e-14)


@seed(1)
@settings(max_examples=200, deadline=None)
@given(disk_points, disk_points)
def test_distance_representations_agree(z, w):
    assert moebius_pseudo_distance(z, w) == pytest.approx(math.tanh(disk_geodesic_distance(z, w) / 2.0), abs=1e-12)


def test_pseudo_distance_triangle_inequality():
    rng = np.random.default_rng(7)
    radius = 0.95 * np.sqrt(rng.random((10000, 3)))
    angle = rng.uniform(0.0, 2.0 * np.pi, (10000, 3))
    points = radius * np.exp(1j * angle)
    for a, b, c in points:
        assert moebius_pseudo_distance(a, c) <= moebius_pseudo_distance(a, b) + moebius_pseudo_distance(b, c) + 1e-12


@seed(2)
@settings(max_examples=100, deadline=None)
@given(disk_points, disk_points, disk_points, st.floats(min_value=0.0, max_value=2 * math.pi))
def test_geodesic_distance_automorphism_invariant(z, w, center, phase):
    phi = DiskAutomorphism(center, phase)
    assert disk_geodesic_distance(phi(z), phi(w)) == pytest.approx(disk_geodesic_distance(z, w), abs=1e-10)


def test_geodesic_endpoints():
    z, w = 0.1 - 0.4j, -0.5 + 0.2j
    geodesic = disk_geodesic(z, w)
    assert abs(geodesic.point(0.0) - z) < 1e-12
    assert abs(geodesic.point(geodesic.length) - w) < 1e-12
    assert geodesic.length == pytest.approx(disk_geodesic_distance(z, w), rel=1e-12)


def test_symmetric_geodesic_is_diameter():
    geodesic = disk_geodesic(-0.4, 0.4)
    samples = geodesic.point(np.linspace(0.0, geodesic.length, 9))
    np.testing.assert_allclose(np.imag(samples), 0.0, atol=1e-14)
    assert np.all(np.diff(np.real(samples)) > 0)


def test_geodesic_commutes_with_automorphism():
    z, w = 0.3 + 0.1j, -0.2 - 0.5j
    phi = DiskAutomorphism(0.25 - 0.35j, 1.1)
    original = disk_geodesic(z, w)
    image = disk_geodesic(phi(z), phi(w))
    s = np.linspace(0.0, original.length, 11)
    np.testing.assert_allclose(phi(original.point(s)), image.point(s), atol=1e-10)


def test_coincident_geodesic_rejected():
    with pytest.raises(DegenerateGeodesicError):
        disk_geodesic(0.2j, 0.2j)
    with pytest.raises(DegenerateGeodesicError):
        mirror_map(0.1, 0.1, 1.0)


def test_mirror_map_examples():
    along = mirror_map(-0.3, 0.3, (1.0, 0.0))
    assert along.real < 0 and abs(along.imag) < 1e-14
    normal = mirror_map(-0.3, 0.3, (0.0, 1.0))
    assert normal.imag > 0 and abs(normal.real) < 1e-14


@seed(3)
@settings(max_examples=200, deadline=None)
@given(disk_points, disk_points, st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False))
def test_mirror_map_isometry_and_involution(z, w, v):
    if abs(z - w) < 1e-6:
        return
    image = mirror_map(z, w, v)
    assert hyperbolic_norm(w, image) == pytest.approx(hyperbolic_norm(z, v), abs=1e-10 * max(1.0, abs(v)))
    back = mirror_map(w, z, image)
    assert abs(back - v) <= 1e-10 * max(1.0, abs(v))


def test_mirror_map_negates_geodesic_tangent():
    z, w = 0.2 + 0.3j, -0.4 + 0.1j
    geodesic = disk_geodesic(z, w)
    t_start = geodesic.tangent(0.0)
    t_end = geodesic.tangent(geodesic.length)
    image = mirror_map(z, w, t_start)
    assert abs(image + t_end) < 1e-10


def test_diffusion_matrix_at_origin():
    np.testing.assert_array_equal(chc2_diffusion_matrix(np.zeros(4)), 2.0 * np.eye(4))


def test_diffusion_matrix_eigenvalues_example():
    x = np.array([0.5, 0.5, 0.5, 0.0])  # |x|^2 = 0.75
    eig = np.sort(np.linalg.eigvalsh(chc2_diffusion_matrix(BallPoint4(*x))))
    np.testing.assert_allclose(eig, [0.5, 0.5, 1.0, 1.0], atol=1e-12)


@seed(4)
@settings(max_examples=300, deadline=None)
@given(ball_points)
def test_diffusion_matrix_structure(x):
    a = chc2_diffusion_matrix(x)
    np.testing.assert_allclose(a, a.T, atol=1e-14, rtol=0)
    s = math.sqrt(1.0 - float(x @ x))
    expected = np.sort([2 * s * s, 2 * s * s, 2 * s, 2 * s])
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(a)), expected, atol=1e-10)


def test_diffusion_batch_matches_single():
    rng = np.random.default_rng(11)
    xs = rng.uniform(-0.45, 0.45, (20, 4))
    batch = chc2_diffusion_batch(xs)
    for x, a in zip(xs, batch):
        np.testing.assert_allclose(a, chc2_diffusion_matrix(x), atol=1e-15)


def test_diffusion_matrix_rejects_boundary():
    with pytest.raises(PreconditionError):
        chc2_diffusion_matrix(np.array([1.0, 0.0, 0.0, 0.0]))


def test_chart_conversion():
    x = np.array([0.1, -0.2, 0.3, 0.05])
    np.testing.assert_array_equal(real_to_complex(x), [0.1 - 0.2j, 0.3 + 0.05j])
    np.testing.assert_array_equal(complex_to_real(real_to_complex(x)), x)


def test_ball_automorphism_involution_and_center():
    a = np.array([0.3 + 0.1j, -0.2 + 0.4j])
    z = np.array([-0.1 + 0.2j, 0.5 - 0.3j])
    np.testing.assert_allclose(ball_automorphism(a, a), 0.0, atol=1e-15)
    np.testing.assert_allclose(ball_automorphism(a, ball_automorphism(a, z)), z, atol=1e-12)


def test_ball_distance_reduces_to_disk():
    assert ball_pseudo_distance([0.3 + 0.2j], [-0.1j]) == pytest.approx(moebius_pseudo_distance(0.3 + 0.2j, -0.1j),
                                                                      abs=1e-14)


def test_model_constants_tables():
    row = model_constants(ModelSpace.COMPLEX_HYPERBOLIC, 3)
    assert (row.sectional_value, row.orth_ricci_value) == (-4.0, -4.0)
    row = model_constants(ModelSpace.COMPLEX_EUCLIDEAN, 3)
    assert (row.sectional_value, row.orth_ricci_value) == (0.0, 0.0)
    row = model_constants(ModelSpace.QUATERNION_HYPERBOLIC, 2)
    assert (row.sectional_value, row.orth_ricci_value) == (-12.0, -4.0)
    assert model_constants("complex_hyperbolic", 1).orth_ricci_value == 0.0


def test_profile_for_model():
    profile = CurvatureProfile.for_model(ModelSpace.COMPLEX_HYPERBOLIC, 2)
    assert (profile.family, profile.k1, profile.k2) == (CurvatureFamily.KAHLER, -1.0, -1.0)
    profile = CurvatureProfile.for_model(ModelSpace.QUATERNION_HYPERBOLIC, 2)
    assert (profile.k1, profile.k2) == (-1.0, -1.0)
    assert DISK_PROFILE.k1 == -0.25 and DISK_PROFILE.n == 1


def test_profile_validation():
    with pytest.raises(PreconditionError):
        CurvatureProfile("kahler", 0, -1.0, -1.0)
    with pytest.raises(PreconditionError):
        CurvatureProfile("kahler", 1, -1.0, -1.0, m=-1.0)
    assert CurvatureProfile("Quaternionic", 1, -1.0, -1.0).family is CurvatureFamily.QUATERNIONIC
