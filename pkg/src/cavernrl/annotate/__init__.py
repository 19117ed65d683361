from .store import (
    AnnotationRecord,
    PreferenceRecord,
    AnnotationStore,
    PreferenceStore,
    CandidateQueue,
    CaptionList,
)
from .prompts import (
    ParseError,
    build_binary_prompt,
    build_ranking_prompt,
    parse_binary_response,
    parse_ranking_response,
    GOAL_VARIANTS,
    ELLM_GOAL_STRINGS,
)
from .backends import BackendError, MockAnnotator, HttpAnnotator, StalledAnnotator
from .service import AnnotationService, annotate_batch, subsample_annotations

__all__ = [
    "AnnotationRecord",
    "PreferenceRecord",
    "AnnotationStore",
    "PreferenceStore",
    "CandidateQueue",
    "CaptionList",
    "ParseError",
    "build_binary_prompt",
    "build_ranking_prompt",
    "parse_binary_response",
    "parse_ranking_response",
    "GOAL_VARIANTS",
    "ELLM_GOAL_STRINGS",
    "BackendError",
    "MockAnnotator",
    "HttpAnnotator",
    "StalledAnnotator",
    "AnnotationService",
    "annotate_batch",
    "subsample_annotations",
]
