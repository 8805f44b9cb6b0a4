"""Generative biomedical named-entity recognition toolkit.

Tagging formats and their decoders, prompt construction, batch inference,
exact-match evaluation with error analysis, and an entity selector.
"""

from .align import Alignment, align_to_source
from .codec import STRATEGIES, DecodeOutcome, TaggedText, decode, encode
from .corpus import bundled_schemas, load_corpus, load_schemas, write_corpus
from .errors import (
    AlignmentRejected,
    BackendError,
    BionerError,
    DuplicateEntity,
    InsufficientNegatives,
    MarkerCollision,
    MissingPlaceholder,
    NoTokenOverlap,
    OverlapUnserializable,
    ParseError,
    SchemaNotFound,
    ValidationError,
)
from .evaluation import EvalReport, MatchResult, compute_metrics, evaluate_corpus, match_entities
from .inference import EchoGoldBackend, GenerationRequest, PerturbingBackend, WireBackend, run_batch
from .model import DatasetSchema, EntitySpan, Sentence, Token, char_span_to_token_span, tokenize, validate_sentence
from .prompts import PromptTemplate, build_training_record, mix_datasets, render_prompt
from .selector import filter_predictions, gen_selector_dataset, mark_candidate

__version__ = "0.1.0"
