import numpy as np
import pytest

from plateau_fem.mesh import MeshError, MshParseError, TetMesh, build_box_mesh, read_msh, signed_volumes

MSH22_TWO_TETS = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
5
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
5 1 1 1
$EndNodes
$Elements
3
1 2 2 7 1 1 2 3
2 4 2 5 1 1 2 3 4
3 4 2 6 1 2 3 4 5
$EndElements
"""

MSH41_SINGLE = """$MeshFormat
4.1 0 8
$EndMeshFormat
$Entities
0 0 0 1
1 0 0 0 1 1 1 1 9 0
$EndEntities
$Nodes
1 4 1 4
3 1 0 4
10
11
12
13
0 0 0
1 0 0
0 1 0
0 0 1
$EndNodes
$Elements
1 1 1 1
3 1 4 1
1 10 11 12 13
$EndElements
"""


def write(tmp_path, text, name="m.msh"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestBoxMesh:
    def test_freudenthal_cube_counts(self, unit_cube):
        m = unit_cube
        assert (m.n_nodes, m.n_edges, m.n_facets, m.n_cells) == (8, 19, 18, 6)
        assert m.euler_characteristic == 1

    def test_two_hexes(self):
        m = build_box_mesh((2, 1, 1), lower=(0, 0, 0), upper=(2, 1, 1))
        assert m.n_cells == 12
        np.testing.assert_allclose(m.volumes, 2.0 / 12, rtol=1e-14)

    @pytest.mark.parametrize("sub", [(0, 1, 1), (1, -1, 1)])
    def test_bad_subdivisions(self, sub):
        with pytest.raises(ValueError):
            build_box_mesh(sub)

    @pytest.mark.parametrize("n", [(1, 2, 3), (4, 4, 4)])
    def test_invariants(self, n):
        m = build_box_mesh(n, (1.0, 2.0, 0.5))
        assert np.all(signed_volumes(m.nodes, m.cells) > 0)
        assert np.all(m.edges[:, 0] < m.edges[:, 1])
        assert np.all(np.diff(m.facets, axis=1) > 0)
        assert m.euler_characteristic == 1
        np.testing.assert_allclose(m.volumes.sum(), 8.0, rtol=1e-12)
        # interior facets have two cells, boundary facets one
        shared = np.bincount(m.cell_facets.ravel(), minlength=m.n_facets)
        assert set(np.unique(shared)) == {1, 2}
        assert np.array_equal(shared == 1, m.facet_cells[:, 1] < 0)

    def test_facet_signs_are_outward(self):
        m = build_box_mesh((2, 2, 2))
        x = m.nodes[m.facets[m.cell_facets]]
        n = np.cross(x[:, :, 1] - x[:, :, 0], x[:, :, 2] - x[:, :, 0]) * m.cell_facet_signs[..., None]
        outward = np.einsum("cfd,cfd->cf", n, x[:, :, 0] - m.centroids[:, None])
        assert np.all(outward > 0)

    def test_edge_signs_match_local_direction(self):
        m = build_box_mesh((2, 2, 2))
        from plateau_fem.mesh import LOCAL_EDGES

        local = np.asarray(LOCAL_EDGES)
        a = m.cells[:, local[:, 0]]
        b = m.cells[:, local[:, 1]]
        assert np.array_equal(m.cell_edge_signs, np.where(a < b, 1, -1))

    def test_negative_cells_are_reoriented(self, single_tet):
        flipped = TetMesh.from_cells(single_tet.nodes, np.array([[1, 0, 2, 3]]))
        assert flipped.volumes[0] == pytest.approx(1 / 6)
        assert np.all(signed_volumes(flipped.nodes, flipped.cells) > 0)

    def test_degenerate_cell(self):
        nodes = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]])
        with pytest.raises(MeshError):
            TetMesh.from_cells(nodes, np.array([[0, 1, 2, 3]]))

    def test_cell_order_does_not_change_entities(self):
        m = build_box_mesh((2, 2, 2))
        perm = np.random.default_rng(0).permutation(m.n_cells)
        m2 = TetMesh.from_cells(m.nodes, m.cells[perm])
        assert np.array_equal(m.edges, m2.edges)
        assert np.array_equal(m.facets, m2.facets)


class TestReadMsh:
    def test_single_tet_v41(self, tmp_path):
        m = read_msh(write(tmp_path, MSH41_SINGLE))
        assert (m.n_nodes, m.n_cells, m.n_edges, m.n_facets) == (4, 1, 6, 4)
        assert m.tags.tolist() == [9]

    def test_two_tets_v22(self, tmp_path):
        m = read_msh(write(tmp_path, MSH22_TWO_TETS))
        assert m.n_cells == 2
        assert np.sum(m.facet_cells[:, 1] >= 0) == 1
        assert m.tags.tolist() == [5, 6]

    def test_truncated(self, tmp_path):
        text = MSH22_TWO_TETS[: MSH22_TWO_TETS.index("3 4 2 6")]
        with pytest.raises(MshParseError) as err:
            read_msh(write(tmp_path, text))
        assert err.value.lineno > 0
        assert "line" in str(err.value)

    def test_unknown_version(self, tmp_path):
        with pytest.raises(MshParseError, match="version"):
            read_msh(write(tmp_path, MSH22_TWO_TETS.replace("2.2 0 8", "3.0 0 8")))

    def test_no_tets(self, tmp_path):
        text = MSH22_TWO_TETS.replace("3\n1 2 2 7 1 1 2 3\n2 4", "1\n1 2 2 7 1 1 2 3\n#").split("#")[0] + "$EndElements\n"
        with pytest.raises(MshParseError, match="no tetrahedral"):
            read_msh(write(tmp_path, text))

    def test_dangling_node(self, tmp_path):
        with pytest.raises(MshParseError, match="unknown node") as err:
            read_msh(write(tmp_path, MSH22_TWO_TETS.replace("2 3 4 5\n", "2 3 4 99\n")))
        assert err.value.lineno == 16  # third element line

    def test_unknown_sections_are_skipped(self, tmp_path):
        text = MSH22_TWO_TETS.replace("$Nodes", "$PhysicalNames\n1\n3 5 \"vol\"\n$EndPhysicalNames\n$Nodes")
        assert read_msh(write(tmp_path, text)).n_cells == 2


def test_submesh_keeps_geometry():
    m = build_box_mesh((2, 2, 2))
    keep = m.centroids[:, 0] < 0
    sub = m.submesh(keep)
    assert sub.n_cells == keep.sum()
    np.testing.assert_allclose(sub.volumes.sum(), m.volumes[keep].sum())
    assert sub.n_nodes == len(np.unique(m.cells[keep]))
