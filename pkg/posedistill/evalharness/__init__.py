"""
Evaluation and experiment protocols: metric reports, zero/few-shot
protocols, ablation sweeps, and pose visualizations.
"""

from .ablation import (
    ABLATION_CSV,
    CSV_HEADER,
    SUMMARY_CSV,
    SUMMARY_HEADER,
    AblationCell,
    AblationEntry,
    AblationSpec,
    AblationTable,
    cell_dir,
    default_ablation_spec,
    run_ablation,
    student_variants,
)
from .fewshot import FewShotOutcome, ProtocolIndices, run_fewshot
from .report import (
    METRICS_NAME,
    CategoryMetrics,
    MetricsReport,
    evaluate,
    report_from_predictions,
)
from .visualize import KINDS, to_gray8, visualize, write_pgm

__all__ = [
    # reports
    "CategoryMetrics",
    "MetricsReport",
    "evaluate",
    "report_from_predictions",
    "METRICS_NAME",
    # protocols
    "ProtocolIndices",
    "FewShotOutcome",
    "run_fewshot",
    # ablations
    "AblationEntry",
    "AblationSpec",
    "AblationCell",
    "AblationTable",
    "default_ablation_spec",
    "student_variants",
    "run_ablation",
    "cell_dir",
    "ABLATION_CSV",
    "CSV_HEADER",
    "SUMMARY_CSV",
    "SUMMARY_HEADER",
    # visualization
    "KINDS",
    "to_gray8",
    "write_pgm",
    "visualize",
]
