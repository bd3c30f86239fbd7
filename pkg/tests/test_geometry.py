import numpy as np
import pytest

from synthforge.errors import EmptyInputError, ParameterError
from synthforge.geometry import (
    Aabb,
    Mesh,
    PrimitiveSpec,
    Tally,
    apply_subdivide,
    apply_wireframe,
    bounding_box,
    empty_mesh,
    make_primitive,
    merge,
    unique_edges,
)
from synthforge.rng import RngStream

from conftest import random_primitive_spec


def euler_characteristic(mesh: Mesh) -> int:
    return mesh.vertex_count - len(unique_edges(mesh)) + mesh.face_count


def cube(edge=2.0, **placement) -> Mesh:
    return make_primitive(PrimitiveSpec("cube", {"edge": edge}, **placement))


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

def test_cube_counts_and_aabb():
    m = cube(2.0)
    assert m.vertex_count == 8
    assert m.face_count == 6
    assert all(len(f) == 4 for f in m.faces)
    box = bounding_box(m)
    assert np.allclose(box.lo, [-1, -1, -1]) and np.allclose(box.hi, [1, 1, 1])


def test_torus_counts_and_topology():
    m = make_primitive(PrimitiveSpec(
        "torus", {"major_radius": 2.0, "tube_radius": 0.5},
        {"major_segments": 16, "minor_segments": 16}))
    assert m.vertex_count == 256
    assert m.face_count == 256
    assert euler_characteristic(m) == 0


def test_uv_sphere_tessellation_counts():
    # 8 segments x 6 rings: 5 interior rows of 8 vertices plus the two poles,
    # 2*8 pole triangles plus 4 bands of 8 quads, and 88 unique edges.
    m = make_primitive(PrimitiveSpec("sphere", {"radius": 1.0},
                                     {"segments": 8, "rings": 6}))
    assert m.vertex_count == 42
    assert m.face_count == 48
    assert len(unique_edges(m)) == 88
    assert euler_characteristic(m) == 2


@pytest.mark.parametrize("kind", ["cube", "sphere", "cone", "cylinder", "torus"])
def test_euler_characteristic_randomized(kind):
    rng = RngStream(77, hash(kind) % 1000)
    expected = 0 if kind == "torus" else 2
    for i in range(10):
        spec = random_primitive_spec(rng, kind)
        assert euler_characteristic(make_primitive(spec)) == expected, spec


def test_primitive_placement_applied():
    m = cube(2.0, translation=(5.0, 0.0, 0.0), scale=0.5)
    box = bounding_box(m)
    assert np.allclose(box.center, [5, 0, 0])
    assert np.allclose(box.extents, [1, 1, 1])


@pytest.mark.parametrize("spec", [
    PrimitiveSpec("cube", {"edge": -1.0}),
    PrimitiveSpec("cube", {"edge": 0.0}),
    PrimitiveSpec("sphere", {"radius": 1.0}, {"segments": 2, "rings": 6}),
    PrimitiveSpec("torus", {"major_radius": 1.0, "tube_radius": 1.5},
                  {"major_segments": 8, "minor_segments": 8}),
    PrimitiveSpec("nonagon", {"edge": 1.0}),
])
def test_invalid_primitive_specs_rejected(spec):
    with pytest.raises(ParameterError):
        make_primitive(spec)


def test_make_primitive_pure():
    spec = PrimitiveSpec("sphere", {"radius": 1.3}, {"segments": 9, "rings": 7},
                         translation=(0.1, 0.2, 0.3), scale=1.1)
    a, b = make_primitive(spec), make_primitive(spec)
    assert np.array_equal(a.vertices, b.vertices)
    assert a.faces == b.faces


# ---------------------------------------------------------------------------
# Wireframe modifier
# ---------------------------------------------------------------------------

def test_wireframe_single_triangle_counts():
    tri = Mesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), [(0, 1, 2)])
    out = apply_wireframe(tri, 0.1)
    assert out.vertex_count == 3 * 8
    assert out.face_count == 3 * 4
    assert all(len(f) == 4 for f in out.faces)
    out.validate()


def test_wireframe_empty_mesh():
    out = apply_wireframe(empty_mesh(), 0.1)
    assert out.is_empty() and out.face_count == 0


def test_wireframe_aabb_containment_cube():
    m = cube(2.0)
    out = apply_wireframe(m, 0.05)
    assert bounding_box(m).inflate(0.05).contains(bounding_box(out))


def test_wireframe_aabb_containment_randomized():
    rng = RngStream(123, 0)
    for i in range(100):
        m = make_primitive(random_primitive_spec(rng))
        thickness = float(rng.uniform(0.01, 0.2))
        out = apply_wireframe(m, thickness)
        assert bounding_box(m).inflate(thickness).contains(bounding_box(out))


def test_wireframe_degenerate_edge_skipped():
    m = Mesh(np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]], float), [(0, 1, 2)])
    tally = Tally()
    out = apply_wireframe(m, 0.1, tally)
    assert tally.count == 1
    assert out.face_count == 2 * 4   # the two non-degenerate edges


def test_wireframe_invalid_thickness():
    with pytest.raises(ParameterError):
        apply_wireframe(cube(), 0.0)


# ---------------------------------------------------------------------------
# Catmull-Clark subdivision
# ---------------------------------------------------------------------------

def test_subdivide_cube_level1_counts():
    out = apply_subdivide(cube(2.0), 1)
    assert out.vertex_count == 26     # V + E + F = 8 + 12 + 6
    assert out.face_count == 24
    assert all(len(f) == 4 for f in out.faces)


def test_subdivide_cube_stays_in_aabb():
    m = cube(2.0)
    out = apply_subdivide(m, 1)
    assert bounding_box(m).contains(bounding_box(out))


def test_subdivide_face_count_law():
    # One level multiplies faces into one quad per input face corner.
    rng = RngStream(31, 0)
    for i in range(15):
        m = make_primitive(random_primitive_spec(rng))
        corners = sum(len(f) for f in m.faces)
        out = apply_subdivide(m, 1)
        assert out.face_count == corners


def test_subdivide_levels_compose():
    m = cube(2.0)
    assert apply_subdivide(m, 2).face_count == 24 * 4


def test_subdivide_level_zero_rejected():
    with pytest.raises(ParameterError):
        apply_subdivide(cube(), 0)


def test_subdivide_rejects_ngons():
    penta = Mesh(np.array([[np.cos(a), np.sin(a), 0.0] for a in
                           np.linspace(0, 2 * np.pi, 5, endpoint=False)]),
                 [(0, 1, 2, 3, 4)])
    with pytest.raises(ParameterError):
        apply_subdivide(penta, 1)


def test_subdivide_open_surface_boundary_rules():
    quad = Mesh(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float),
                [(0, 1, 2, 3)])
    out = apply_subdivide(quad, 1)
    assert out.face_count == 4
    # Boundary rules keep the patch inside its own bounding square.
    assert bounding_box(quad).contains(bounding_box(out))


def test_subdivide_nonmanifold_edge_flagged():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], float)
    faces = [(0, 1, 2), (0, 1, 3), (0, 1, 4)]   # edge (0,1) borders three faces
    tally = Tally()
    out = apply_subdivide(Mesh(verts, faces), 1, tally)
    assert tally.count >= 1
    out.validate()


def test_subdivide_carries_albedo_clamped():
    m = cube(2.0)
    albedo = np.tile([1.0, 0.5, 0.0], (8, 1))
    out = apply_subdivide(Mesh(m.vertices, m.faces, albedo), 1)
    assert out.albedo is not None and len(out.albedo) == out.vertex_count
    assert out.albedo.min() >= 0.0 and out.albedo.max() <= 1.0


# ---------------------------------------------------------------------------
# merge / bounding_box
# ---------------------------------------------------------------------------

def test_merge_concatenates_and_shifts():
    a, b = cube(1.0), cube(1.0, translation=(3.0, 0.0, 0.0))
    m = merge([a, b])
    assert m.vertex_count == 16 and m.face_count == 12
    assert m.faces[6] == tuple(i + 8 for i in b.faces[0])


def test_merge_empty_list():
    assert merge([]).is_empty()


def test_merge_albedo_rules():
    a = cube(1.0)
    with_albedo = Mesh(a.vertices, a.faces, np.full((8, 3), 0.5))
    assert merge([with_albedo, a]).albedo is None
    both = merge([with_albedo, with_albedo])
    assert both.albedo is not None and len(both.albedo) == 16


def test_merge_drops_degenerate_faces():
    sliver = Mesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float), [(0, 1, 2)])
    tally = Tally()
    m = merge([cube(1.0), sliver], tally)
    assert tally.count == 1
    assert m.face_count == 6


def test_merge_associative_on_bounding_boxes():
    rng = RngStream(8, 0)
    a, b, c = (make_primitive(random_primitive_spec(rng)) for _ in range(3))
    left = bounding_box(merge([a, merge([b, c])]))
    right = bounding_box(merge([merge([a, b]), c]))
    assert np.array_equal(left.lo, right.lo) and np.array_equal(left.hi, right.hi)


def test_bounding_box_basics():
    assert np.allclose(bounding_box(cube(2.0)).extents, [2, 2, 2])
    single = Mesh(np.array([[1.0, 2.0, 3.0]]), [])
    box = bounding_box(single)
    assert np.array_equal(box.lo, box.hi)
    with pytest.raises(EmptyInputError):
        bounding_box(empty_mesh())


def test_oversize_rejected_by_qc_rule():
    # Alg-style quality control: callers compare max extent against the bound.
    big = cube(20.0)
    assert bounding_box(big).max_extent > 10.0


def test_aabb_invariant():
    with pytest.raises(ParameterError):
        Aabb((1.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def test_mesh_validate_catches_bad_faces():
    with pytest.raises(ParameterError):
        Mesh(np.zeros((2, 3)), [(0, 1, 2)]).validate()
    with pytest.raises(ParameterError):
        Mesh(np.zeros((3, 3)), [(0, 1, 1)]).validate()
    with pytest.raises(ParameterError):
        Mesh(np.array([[np.nan, 0, 0]]), []).validate()
    with pytest.raises(ParameterError):
        Mesh(np.zeros((4, 3)), [(0, 1, 2)], albedo=np.full((4, 3), 1.5)).validate()
