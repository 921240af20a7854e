"""Named-entity tagging with span-level confidence.

A biLSTM-CRF tagger labels tokens with IOB tags; a second, small LSTM reads
the tagger's encoder outputs around a candidate span and returns the
probability that the span is an entity.
"""

__version__ = "0.1.0"

from .calibration import IsotonicCalibrator, calibrate, fit_pav
from .config import Config
from .corpus import Corpus, Sentence, load_conll, write_conll
from .errors import BundleError, DataError, DimensionError, NescError, TrainingError, UsageError
from .features import EmbeddingTable, Token, tokenize, vectorize
from .metrics import PRF, entity_prf, pr_curve, token_prf
from .ner import NerModel, NerParams, tag, train_ner
from .nesc import NescParams, context_window, score_span, train_nesc, window_slice
from .sampling import NescDataset, NescSample, build_dataset, fit_length_distribution, perturb
from .tags import LABELS, EntitySpan, decode_spans
