from .common import (
    DimensionMismatchError,
    Standardizer,
    TrainingDivergedError,
    normalize_scores,
    softmax,
)
from .lstm import (
    LstmHyperParams,
    LstmModel,
    init_lstm,
    lstm_backward,
    lstm_forward,
    lstm_train,
    predict_lstm,
    sequence_loss,
)
from .pipeline import (
    REPRESENTATIONS,
    Classifier,
    featurize_entries,
    flatten_tiles,
    load_classifier,
    represent,
    save_classifier,
    score_clips,
    train_classifier,
)
from .svm import LinearSvmModel, SvmHyperParams, predict_svm, train_svm
