"""Alignment and downstream sample construction."""
from .corpus import (
    ALIGN_CELLS,
    InsufficientGraphs,
    build_corpus,
    build_dataset,
    build_downstream,
    is_validation,
    manifest,
    read_samples,
    split_of,
    write_samples,
)
from .samples import (
    AlignmentSample,
    NoNegativeAvailable,
    control_sample,
    describe,
    edge_question,
    make_child_pred,
    make_downstream,
    make_edge_pred,
    make_graph2code,
    make_parent_pred,
)
from .templates import TABLES, TemplateTable

__all__ = [
    "ALIGN_CELLS", "AlignmentSample", "InsufficientGraphs", "NoNegativeAvailable", "TABLES", "TemplateTable",
    "build_corpus", "build_dataset", "build_downstream", "control_sample", "describe", "edge_question",
    "is_validation", "make_child_pred", "make_downstream", "make_edge_pred", "make_graph2code",
    "make_parent_pred", "manifest", "read_samples", "split_of", "write_samples",
]
