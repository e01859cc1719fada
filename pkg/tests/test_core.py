import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cloud
from oracles import components_brute, pairwise_dist, radius_brute
from terrainseg.core import (
    ClassLabel, PointCloud, RigidTransform, SpatialIndex, apply_transform, as_ids, build_spatial_index,
    concat, connected_components, load_point_cloud, orthonormalize, radius_neighbors, save_point_cloud,
    voxel_subsample, voxelize,
)
from terrainseg.core.io import origin_sidecar
from terrainseg.errors import EmptyCloud, MissingProperty, ParseError


# --- data model -------------------------------------------------------------

def test_cloud_rejects_nonfinite_and_bad_colors():
    with pytest.raises(ValueError):
        make_cloud([[0, 0, np.nan]])
    with pytest.raises(ValueError):
        PointCloud(np.zeros((1, 3)), [[0, 0, 256]])
    with pytest.raises(ValueError):
        make_cloud(np.zeros((2, 3)), labels=[1])
    with pytest.raises(ValueError):
        make_cloud(np.zeros((1, 3)), labels=[7])
    with pytest.raises(ValueError):
        make_cloud(np.zeros((1, 3)), crs_tag="")


def test_subset_and_concat_keep_georeference():
    c = make_cloud(np.arange(12.0).reshape(4, 3), labels=[1, 2, 3, 0], geo_origin=(1, 2, 3), crs_tag="utm17n")
    s = c.subset([2, 0])
    assert s.labels.tolist() == [3, 1]
    assert s.crs_tag == "utm17n" and s.geo_origin.tolist() == [1, 2, 3]
    both = concat([s, s])
    assert len(both) == 4 and both.labels.tolist() == [3, 1, 3, 1]
    with pytest.raises(EmptyCloud):
        make_cloud(np.zeros((0, 3))).require_points()


def test_as_ids_normalizes():
    assert as_ids({3, 1}, 5).tolist() == [1, 3]
    assert as_ids(np.array([True, False, True]), 3).tolist() == [0, 2]
    assert as_ids([2, 2, 0], 3).tolist() == [0, 2]
    with pytest.raises(IndexError):
        as_ids([5], 3)


# --- file I/O ----------------------------------------------------------------

PLY3 = """ply
format ascii 1.0
element vertex 3
property double x
property double y
property double z
property uchar red
property uchar green
property uchar blue
end_header
0 0 0 255 0 0
1 0 0 0 255 0
0 1 0.5 0 0 255
"""


def test_load_three_vertex_ply(tmp_path):
    p = tmp_path / "a.ply"
    p.write_text(PLY3)
    c = load_point_cloud(p)
    assert len(c) == 3
    assert c.rgb.tolist() == [[255, 0, 0], [0, 255, 0], [0, 0, 255]]
    assert c.labels is None and c.crs_tag == "local" and not c.geo_origin.any()


def test_load_label_property(tmp_path):
    p = tmp_path / "a.ply"
    text = PLY3.replace("property uchar blue\n", "property uchar blue\nproperty uchar label\n")
    for rgb, code in (("255 0 0", 1), ("0 255 0", 2), ("0 0 255", 3)):
        text = text.replace(f"{rgb}\n", f"{rgb} {code}\n")
    p.write_text(text)
    assert load_point_cloud(p).labels.tolist() == [1, 2, 3]


def test_missing_color_and_malformed(tmp_path):
    p = tmp_path / "a.ply"
    p.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                 "property float z\nend_header\n0 0 0\n")
    with pytest.raises(MissingProperty):
        load_point_cloud(p)
    p.write_text(PLY3.replace("0 1 0.5 0 0 255", "0 1 zz 0 0 255"))
    with pytest.raises(ParseError):
        load_point_cloud(p)
    p.write_text(PLY3.replace("element vertex 3", "element vertex 0").split("end_header")[0] + "end_header\n")
    with pytest.raises(EmptyCloud):
        load_point_cloud(p)


@pytest.mark.parametrize("suffix", [".ply", ".xyz"])
def test_round_trip(tmp_path, rng, suffix):
    xyz = rng.normal(size=(50, 3)) * 1000
    c = PointCloud(xyz, rng.integers(0, 256, (50, 3)), rng.integers(0, 4, 50),
                   geo_origin=(500000.25, 4200000.5, 12.0), crs_tag="utm17n")
    p = tmp_path / f"c{suffix}"
    save_point_cloud(c, p)
    back = load_point_cloud(p)
    assert np.array_equal(back.xyz, c.xyz)
    assert np.array_equal(back.rgb, c.rgb) and np.array_equal(back.labels, c.labels)
    assert back.geo_origin.tolist() == c.geo_origin.tolist() and back.crs_tag == "utm17n"
    if suffix == ".xyz":
        assert origin_sidecar(p).exists()
    else:
        assert "property uchar label" in p.read_text()


def test_save_empty_raises(tmp_path):
    with pytest.raises(EmptyCloud):
        save_point_cloud(make_cloud(np.zeros((0, 3))), tmp_path / "e.ply")


# --- spatial index -------------------------------------------------------------

def test_index_single_point_and_empty():
    idx = build_spatial_index(make_cloud([[1, 2, 3]]))
    assert len(idx) == 1
    assert radius_neighbors(idx, 0, 5.0).size == 0
    with pytest.raises(EmptyCloud):
        SpatialIndex(np.zeros((0, 3)))


def test_radius_examples():
    idx = SpatialIndex(np.array([[0, 0, 0], [1, 0, 0], [5, 0, 0.0]]))
    assert radius_neighbors(idx, 0, 3, dims=3).tolist() == [1]
    idx2 = SpatialIndex(np.array([[0, 0, 0], [1, 0, 100.0]]))
    assert radius_neighbors(idx2, 0, 3, dims=2).tolist() == [1]
    assert radius_neighbors(idx2, 0, 3, dims=3).tolist() == []


@pytest.mark.parametrize("r", [0.5, 3.0])
@pytest.mark.parametrize("dims", [2, 3])
def test_radius_parity_with_brute_force(rng, r, dims):
    xyz = rng.uniform(0, 20, (1000, 3))
    idx = SpatialIndex(xyz)
    for i in rng.choice(1000, 60, replace=False):
        assert np.array_equal(idx.radius(int(i), r, dims), radius_brute(xyz, xyz[i], r, dims, exclude=i))
    q = rng.uniform(0, 20, 3)
    assert np.array_equal(idx.radius(q, r, dims), radius_brute(xyz, q, r, dims))
    d = pairwise_dist(xyz, dims=dims)
    assert np.array_equal(idx.counts(r, dims), (d <= r).sum(axis=1) - 1)


def test_rebuilt_index_identical(rng):
    xyz = rng.uniform(0, 10, (300, 3))
    a, b = SpatialIndex(xyz), SpatialIndex(xyz.copy())
    for i in range(0, 300, 17):
        assert np.array_equal(a.radius(i, 1.5), b.radius(i, 1.5))
        assert np.array_equal(a.knn(i, 4)[0], b.knn(i, 4)[0])


def test_knn_excludes_self(rng):
    xyz = rng.uniform(0, 10, (200, 3))
    ids, dist = SpatialIndex(xyz).knn(5, 3)
    d = pairwise_dist(xyz)[5]
    d[5] = np.inf
    assert ids.tolist() == np.argsort(d)[:3].tolist()
    assert np.allclose(dist, np.sort(d)[:3])


def test_index_is_immutable(rng):
    idx = SpatialIndex(rng.uniform(size=(10, 3)))
    with pytest.raises(ValueError):
        idx.xyz[0, 0] = 5


# --- connected components ----------------------------------------------------------

def _partition(comp, ids):
    groups = {}
    for c, i in zip(comp.tolist(), ids.tolist()):
        groups.setdefault(c, set()).add(i)
    return {frozenset(g) for g in groups.values()}


def test_components_line_and_clusters(rng):
    line = np.c_[np.arange(200) * 0.5, np.zeros(200), np.zeros(200)]
    comp, surv = connected_components(line, np.arange(200), 1.0, 100)
    assert len(set(comp.tolist())) == 1 and len(surv) == 200

    a = rng.uniform(0, 3, (150, 3))
    b = rng.uniform(0, 3, (150, 3)) + [20, 0, 0]
    comp, _ = connected_components(np.vstack([a, b]), np.arange(300), 1.0, 1)
    assert len(set(comp.tolist())) == 2

    c = rng.uniform(0, 3, (50, 3)) + [20, 0, 0]
    _, surv = connected_components(np.vstack([a, c]), np.arange(200), 1.0, 100)
    assert surv.tolist() == list(range(150))


def test_components_empty_members():
    comp, surv = connected_components(np.zeros((3, 3)), [], 1.0, 1)
    assert comp.size == 0 and surv.size == 0


def test_components_match_union_find_and_ignore_order(rng):
    xyz = rng.uniform(0, 15, (600, 3))
    members = np.sort(rng.choice(600, 400, replace=False))
    comp, surv = connected_components(xyz, members, 1.2, 5)
    expect = set(components_brute(xyz, members, 1.2))
    assert _partition(comp, members) == expect
    assert set(surv.tolist()) == set().union(*[g for g in expect if len(g) >= 5])

    perm = rng.permutation(600)
    inv = np.argsort(perm)
    comp_p, surv_p = connected_components(xyz[perm], inv[members], 1.2, 5)
    ids_p = np.sort(inv[members])
    mapped = {frozenset(perm[list(g)]) for g in _partition(comp_p, ids_p)}
    assert mapped == expect
    assert set(perm[surv_p].tolist()) == set(surv.tolist())


# --- voxels ------------------------------------------------------------------------

def test_voxel_subsample_examples():
    one = voxel_subsample(make_cloud([[0.3, 0.2, 0.1]]), 1.0)
    assert np.allclose(one.xyz, [[0.3, 0.2, 0.1]])
    two = voxel_subsample(make_cloud([[0.2, 0.2, 0.2], [0.6, 0.4, 0.2]]), 1.0)
    assert len(two) == 1 and np.allclose(two.xyz, [[0.4, 0.3, 0.2]])
    apart = voxel_subsample(make_cloud([[0, 0, 0], [10, 0, 0]]), 1.0)
    assert len(apart) == 2
    with pytest.raises(EmptyCloud):
        voxel_subsample(make_cloud(np.zeros((0, 3))), 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), cell=st.sampled_from([0.3, 0.5, 1.0, 2.5]))
def test_voxel_subsample_idempotent_and_shrinks(seed, cell):
    r = np.random.default_rng(seed)
    c = make_cloud(r.uniform(-10, 10, (300, 3)), r.integers(0, 256, (300, 3)))
    once = voxel_subsample(c, cell)
    assert len(once) <= len(c)
    assert len(voxel_subsample(once, cell)) == len(once)


def test_voxelize_examples(rng):
    g = voxelize(make_cloud([[0.5, 0.5, 0.5]]), 1.0)
    assert list(g.cells) == [(0, 0, 0)]
    g2 = voxelize(make_cloud([[0.1, 0.1, 0.1], [0.9, 0.9, 0.9]], rgb=[[0, 0, 0], [255, 255, 255]]), 1.0)
    assert g2.cells[(0, 0, 0)] == (127.5, 127.5, 127.5)
    xyz = rng.uniform(0, 5, (400, 3))
    g3 = voxelize(make_cloud(xyz), 0.7)
    assert len(g3) <= 400
    cells = {tuple(v) for v in np.floor(xyz / 0.7).astype(int).tolist()}
    assert set(g3.cells) == cells
    for key in g3.cells:
        lo, hi = g3.cell_bounds(key)
        assert (((xyz >= lo) & (xyz < hi)).all(axis=1)).any()


# --- rigid transforms ------------------------------------------------------------

def test_apply_transform_examples():
    c = make_cloud([[1, 0, 0], [2, 3, 4]], labels=[1, 2])
    same = apply_transform(c, RigidTransform.identity())
    assert np.array_equal(same.xyz, c.xyz) and np.array_equal(same.labels, c.labels)
    moved = apply_transform(c, RigidTransform.from_translation((1, 2, 3)))
    assert np.allclose(moved.xyz - c.xyz, [1, 2, 3])
    yaw = apply_transform(make_cloud([[1, 0, 0]]), RigidTransform.from_axis_angle((0, 0, 1), np.pi / 2))
    assert np.allclose(yaw.xyz, [[0, 1, 0]], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_transform_preserves_distances_and_is_proper(seed):
    r = np.random.default_rng(seed)
    axis = r.normal(size=3)
    t = RigidTransform.from_axis_angle(axis / np.linalg.norm(axis), r.uniform(-np.pi, np.pi), r.normal(size=3) * 100)
    R = t.rotation
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-9) and abs(np.linalg.det(R) - 1) < 1e-9
    xyz = r.normal(size=(30, 3)) * 50
    d0 = pairwise_dist(xyz)
    d1 = pairwise_dist(t.apply(xyz))
    assert np.allclose(d0, d1, rtol=1e-9, atol=1e-9)
    assert np.allclose(t.inverse().apply(t.apply(xyz)), xyz, atol=1e-9)
    back = RigidTransform.from_text(t.to_text())
    assert np.array_equal(back.matrix(), t.matrix())


def test_transform_rejects_improper():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 2, np.zeros(3))
    R = orthonormalize(np.eye(3) + 1e-4)
    assert abs(np.linalg.det(R) - 1) < 1e-12


def test_compose_order():
    a = RigidTransform.from_translation((1, 0, 0))
    b = RigidTransform.from_axis_angle((0, 0, 1), np.pi / 2)
    p = np.array([[1.0, 0, 0]])
    assert np.allclose(b.compose(a).apply(p), b.apply(a.apply(p)))
    assert np.allclose(b.compose(a).matrix(), b.matrix() @ a.matrix())


def test_class_label_codes():
    assert [int(c) for c in ClassLabel] == [0, 1, 2, 3]
