"""Belief-propagation decoding of compressively sensed signals."""

from .decoder import DecodeResult, DecoderConfig, FactorGraph, build_graph, decode, progressive_decode
from .encoder import (
    MatrixParams,
    SparseSignMatrix,
    encode,
    encode_transpose,
    generate_matrix,
    load_matrix,
    parse_matrix,
    rule_of_thumb_params,
    save_matrix,
    serialize_matrix,
)
from .grid_pdf import Grid, GridPdf, default_grid, paper_grid
from .mog import GaussMixture
from .oracles import (
    BoundParams,
    exact_mmse,
    iht_decode,
    median_decode,
    theorem1_params,
    validate_norm_bounds,
)
from .signal_model import (
    MixturePrior,
    MultiLevelPrior,
    SignalInstance,
    add_noise,
    derive_sigma2,
    sample_multilevel_signal,
    sample_signal,
)

__all__ = [
    "BoundParams",
    "DecodeResult",
    "DecoderConfig",
    "FactorGraph",
    "GaussMixture",
    "Grid",
    "GridPdf",
    "MatrixParams",
    "MixturePrior",
    "MultiLevelPrior",
    "SignalInstance",
    "SparseSignMatrix",
    "add_noise",
    "build_graph",
    "decode",
    "default_grid",
    "derive_sigma2",
    "encode",
    "encode_transpose",
    "exact_mmse",
    "generate_matrix",
    "iht_decode",
    "load_matrix",
    "median_decode",
    "paper_grid",
    "parse_matrix",
    "progressive_decode",
    "rule_of_thumb_params",
    "sample_multilevel_signal",
    "sample_signal",
    "save_matrix",
    "serialize_matrix",
    "theorem1_params",
    "validate_norm_bounds",
]

__version__ = "0.1.0"
