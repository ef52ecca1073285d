"""Multi-sense word embeddings with contextual-teacher distillation."""

from ._core import (
    DataError,
    NumericError,
    PosteriorStore,
    SenseModel,
    TrainConfig,
    Vocabulary,
    ari,
    build_vocab,
    build_vocab_from_corpus,
    distill_loss,
    eval_scws,
    eval_wsi,
    export_text,
    fit_teacher,
    init_model,
    load_model,
    load_vocab,
    nearest_neighbors,
    read_posteriors,
    save_model,
    save_vocab,
    softmax,
    spearman,
    tokenize,
    train,
    validate_teacher_records,
    window_key,
    write_posteriors,
    write_teacher_records,
)

__version__ = "0.1.0"
