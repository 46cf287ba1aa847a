from .extract import (
    EmptyTokenization,
    ExtractionRequest,
    UnknownModel,
    extract,
    load_encoder,
    read_words,
)

__version__ = "0.1.0"
