"""meshforge: parallel quadric mesh decimation, cluster pooling, and fuzzy
mesh convolutions with analytic backward passes."""

from .barycentric import BarycentricPlan, build_barycentric_plan
from .checkpoint import load_conv_checkpoint, save_conv_checkpoint
from .conv import (
    ConvKernel,
    TexturedFacetFeatures,
    facet2facet_backward,
    facet2facet_forward,
    facet2vertex_backward,
    facet2vertex_forward,
    pointwise_backward,
    pointwise_forward,
    vertex2facet_backward,
    vertex2facet_forward,
    vertex2vertex_backward,
    vertex2vertex_forward,
)
from .decimate import (
    DecimationConfig,
    DecimationResult,
    QualityReport,
    VertexCluster,
    clusters,
    decimate_parallel,
    decimate_qem_oracle,
    quality_report,
    representative_vertices,
)
from .errors import (
    CheckpointError,
    InfeasibleTargetError,
    MeshError,
    MeshFormatError,
    StructuralError,
)
from .estimators import ClusterDecimator, QEMDecimator
from .gmm import SphereGMM, default_sphere_means, gmm_coefficients
from .io import MeshFileStats, concat_batch, load_mesh, save_mesh
from .mesh import (
    BatchedMesh,
    FacetGeometry,
    TriMesh,
    VertexFacetAdjacency,
    compute_facet_geometry,
    edge_list,
    vertex_facet_adjacency,
)
from .pooling import pool, pool_backward, unpool, unpool_backward
from .quadrics import Quadric, facet_quadrics, pair_costs, vertex_quadrics

__version__ = "0.1.0"

__all__ = [
    "BarycentricPlan",
    "BatchedMesh",
    "CheckpointError",
    "ClusterDecimator",
    "ConvKernel",
    "DecimationConfig",
    "DecimationResult",
    "FacetGeometry",
    "InfeasibleTargetError",
    "MeshError",
    "MeshFileStats",
    "MeshFormatError",
    "QEMDecimator",
    "Quadric",
    "QualityReport",
    "SphereGMM",
    "StructuralError",
    "TexturedFacetFeatures",
    "TriMesh",
    "VertexCluster",
    "VertexFacetAdjacency",
    "build_barycentric_plan",
    "clusters",
    "compute_facet_geometry",
    "concat_batch",
    "decimate_parallel",
    "decimate_qem_oracle",
    "default_sphere_means",
    "edge_list",
    "facet2facet_backward",
    "facet2facet_forward",
    "facet2vertex_backward",
    "facet2vertex_forward",
    "facet_quadrics",
    "gmm_coefficients",
    "load_conv_checkpoint",
    "load_mesh",
    "pair_costs",
    "pointwise_backward",
    "pointwise_forward",
    "pool",
    "pool_backward",
    "quality_report",
    "representative_vertices",
    "save_conv_checkpoint",
    "save_mesh",
    "unpool",
    "unpool_backward",
    "vertex2facet_backward",
    "vertex2facet_forward",
    "vertex2vertex_backward",
    "vertex2vertex_forward",
    "vertex_facet_adjacency",
    "vertex_quadrics",
]
