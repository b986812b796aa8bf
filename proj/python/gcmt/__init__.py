"""Graph-consistency mean teaching: python surface over the C++ core."""

try:
    from gcmt._gcmt import *  # noqa: F401,F403  (installed layout)
    from gcmt._gcmt import __doc__ as _core_doc
except ImportError:  # build-tree layout: _gcmt.so on PYTHONPATH
    from _gcmt import *  # noqa: F401,F403
    from _gcmt import __doc__ as _core_doc

__all__ = [
    "GcmtError",
    "derive_seed",
    "l2_normalize_rows",
    "row_softmax",
    "teacher_graph",
    "normalized_teacher_graph",
    "fused_teacher_graph",
    "student_graph",
    "ce_loss",
    "mce_loss",
    "gcc_loss",
    "kmeans",
    "evaluate",
    "write_domain_csv",
    "read_dataset_csv",
]
