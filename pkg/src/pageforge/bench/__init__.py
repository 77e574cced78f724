"""Metric suite and template-library curation."""

from .dedup import DedupOutcome, dedup_templates, infer_tags
from .domtree import TreeNode, standardize_dom
from .metrics import (
    CompAwareResult,
    MetricReport,
    QAPair,
    aggregate_overall,
    align_sections,
    answer_and_grade,
    comp_aware_score,
    compression_ratio,
    cosine,
    count_tokens,
    generate_qa,
    grade_answer,
    judge_page,
    readability_ppl,
    semantic_fidelity,
)
from .sampling import cluster_sample, cross_pair
from .simhash import Fingerprint, hamming, pairwise_hamming, simhash
from .ted import tree_edit_distance

__all__ = [
    "CompAwareResult",
    "DedupOutcome",
    "Fingerprint",
    "MetricReport",
    "QAPair",
    "TreeNode",
    "aggregate_overall",
    "align_sections",
    "answer_and_grade",
    "cluster_sample",
    "comp_aware_score",
    "compression_ratio",
    "cosine",
    "count_tokens",
    "cross_pair",
    "dedup_templates",
    "generate_qa",
    "grade_answer",
    "hamming",
    "infer_tags",
    "judge_page",
    "pairwise_hamming",
    "readability_ppl",
    "semantic_fidelity",
    "simhash",
    "standardize_dom",
    "tree_edit_distance",
]
