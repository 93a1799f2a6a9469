"""Intrinsic triangle meshes: builders, refinement, carving, serialisation."""

from .intrinsic import (IntrinsicMesh, MeshQuality, RegionTag, concatenate,
                        heron_area, identify_vertices)
from .build import (build_disk, build_genus_surface, build_polygon,
                    build_rectangle, build_socket, build_sphere)
from .geodesic import (ball_tri_mask, distance_field, injectivity_cap,
                       mesh_graph, sub_is_disk)
from .refine import refine_near
from .carve import chart_angles, chart_distances, remove_geodesic_ball
from .io import read_mesh, write_mesh

__all__ = [
    "IntrinsicMesh", "MeshQuality", "RegionTag", "concatenate", "heron_area",
    "identify_vertices",
    "build_disk", "build_genus_surface", "build_polygon", "build_rectangle",
    "build_socket", "build_sphere",
    "ball_tri_mask", "distance_field", "injectivity_cap", "mesh_graph",
    "sub_is_disk",
    "refine_near",
    "chart_angles", "chart_distances", "remove_geodesic_ball",
    "read_mesh", "write_mesh",
]
