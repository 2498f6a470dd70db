"""ctesql: text-to-SQL with CTE decomposition, retrieval and self-correction."""

from .config import PipelineConfig, load_config
from .pipeline import Engine, QueryResponse, run_preprocess, run_query, submit_feedback

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "PipelineConfig",
    "QueryResponse",
    "load_config",
    "run_preprocess",
    "run_query",
    "submit_feedback",
    "__version__",
]
