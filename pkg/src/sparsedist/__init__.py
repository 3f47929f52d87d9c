"""Image similarity via per-image sparse dictionaries.

Learn an overcomplete patch dictionary for each image, then compare images by
how cheaply each one's patches code under the other's dictionary. Includes
compression-based baselines (NCD, CDM) and an evaluation harness for
clustering, classification, and retrieval over distance matrices.
"""

from .backends import active_backend, available_backends, set_backend
from .compression import (
    cdm,
    compressed_len,
    compression_distance_matrix,
    compressor_names,
    conditional_len,
    image_bytes,
    ncd,
    register_compressor,
)
from .distance import (
    ImageModel,
    build_model,
    distance,
    distance_matrix,
    read_distance_csv,
    relative_complexity,
    sparse_complexity,
    write_distance_csv,
)
from .errors import (
    CompressorError,
    DegenerateInputError,
    DimensionError,
    NumericError,
    ParameterError,
    SparseDistError,
)
from .evaluation import (
    ClusteringResult,
    DatasetManifest,
    Dendrogram,
    affinity_from_distance,
    average_linkage,
    hungarian_accuracy,
    knn_loo_classify,
    parse_manifest,
    precision_recall,
    retrieve,
    spectral_cluster,
)
from .images import (
    PatchConfig,
    PatchMatrix,
    check_image,
    downsample,
    extract_patches,
    load_image,
    log_keypoint_count,
    prepare_image,
    select_scale,
    to_grayscale,
)
from .sparse import (
    CodingParams,
    LearnParams,
    SparseCode,
    batch_code,
    check_dictionary,
    dictionary_init,
    ksvd_learn,
    load_dictionary,
    omp,
    save_dictionary,
)

__version__ = "0.1.0"

__all__ = [
    "CodingParams",
    "ClusteringResult",
    "CompressorError",
    "DatasetManifest",
    "DegenerateInputError",
    "Dendrogram",
    "DimensionError",
    "ImageModel",
    "LearnParams",
    "NumericError",
    "ParameterError",
    "PatchConfig",
    "PatchMatrix",
    "SparseCode",
    "SparseDistError",
    "active_backend",
    "affinity_from_distance",
    "available_backends",
    "average_linkage",
    "batch_code",
    "build_model",
    "cdm",
    "check_dictionary",
    "check_image",
    "compressed_len",
    "compression_distance_matrix",
    "compressor_names",
    "conditional_len",
    "dictionary_init",
    "distance",
    "distance_matrix",
    "downsample",
    "extract_patches",
    "hungarian_accuracy",
    "image_bytes",
    "knn_loo_classify",
    "ksvd_learn",
    "load_dictionary",
    "load_image",
    "log_keypoint_count",
    "ncd",
    "omp",
    "parse_manifest",
    "precision_recall",
    "prepare_image",
    "read_distance_csv",
    "register_compressor",
    "relative_complexity",
    "retrieve",
    "save_dictionary",
    "select_scale",
    "set_backend",
    "sparse_complexity",
    "spectral_cluster",
    "to_grayscale",
    "write_distance_csv",
]
