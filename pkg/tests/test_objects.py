import numpy as np
import pytest

from touchpose.objects import (
    PRIMITIVE_OBJECTS,
    TEST_OBJECTS,
    get_object,
    icosphere_mesh,
    object_names,
)


def signed_volume(mesh):
    a, b, c = mesh.triangle_corners()
    return np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0


class TestObjectLibrary:
    def test_registry_contents(self):
        assert set(PRIMITIVE_OBJECTS) == {"cuboid", "cylinder", "sphere", "edge", "corner"}
        assert len(TEST_OBJECTS) == 6
        assert set(PRIMITIVE_OBJECTS + TEST_OBJECTS) == set(object_names())

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            get_object("teapot")

    @pytest.mark.parametrize("name", object_names())
    def test_mesh_sanity(self, name):
        m = get_object(name)
        assert m.num_faces >= 4
        assert m.face_areas.min() > 0
        assert signed_volume(m) > 0  # outward winding
        lo, hi = m.bounds()
        size = hi - lo
        assert (size > 0.02).all() and (size < 0.30).all()
        # roughly centered
        assert np.abs((lo + hi) / 2).max() < 0.05

    def test_sphere_radius(self):
        m = icosphere_mesh(0.05, 3)
        r = np.linalg.norm(m.vertices, axis=1)
        assert np.allclose(r, 0.05, atol=1e-12)

    def test_deterministic_generation(self):
        a = get_object("mug")
        b = get_object("mug")
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.faces, b.faces)
