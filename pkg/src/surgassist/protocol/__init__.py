from .wire import (
    DuplicateBlockError,
    FunctionCall,
    MalformedCallPayloadError,
    MissingReplyError,
    ParseError,
    StructuredReply,
    UnbalancedTagsError,
    escape_text,
    parse_structured,
    render_structured,
    unescape_text,
)
from .dataset import (
    CORE_FUNCTIONS,
    DATASET_SCHEMA_VERSION,
    DEFAULT_COUNTS,
    ConversationTemplate,
    DatasetRecord,
    GenerationError,
    TRAIN_TEMPLATES,
    UNSEEN_TEMPLATES,
    Violation,
    generate_fc_dataset,
    read_dataset_jsonl,
    scripted_fixtures_from_records,
    validate_record,
    write_dataset_jsonl,
)

__all__ = [
    "CORE_FUNCTIONS",
    "ConversationTemplate",
    "DATASET_SCHEMA_VERSION",
    "DEFAULT_COUNTS",
    "DatasetRecord",
    "DuplicateBlockError",
    "FunctionCall",
    "GenerationError",
    "MalformedCallPayloadError",
    "MissingReplyError",
    "ParseError",
    "StructuredReply",
    "TRAIN_TEMPLATES",
    "UNSEEN_TEMPLATES",
    "UnbalancedTagsError",
    "Violation",
    "escape_text",
    "generate_fc_dataset",
    "parse_structured",
    "read_dataset_jsonl",
    "render_structured",
    "scripted_fixtures_from_records",
    "unescape_text",
    "validate_record",
    "write_dataset_jsonl",
]
