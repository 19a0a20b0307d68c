from .corpus import (
    ClipRecord,
    CorpusError,
    PreparedCorpus,
    VideoSample,
    fit_audio,
    load_raw_sample,
    prepare_corpus,
    scan_corpus,
)
from .grammar import GridGrammarError, GridSentence, parse_grid_sentence
from .preprocess import (
    CANONICAL_TEMPLATE,
    FPS,
    FRAME_HEIGHT,
    FRAME_WIDTH,
    AlignmentError,
    PreprocessConfig,
    augment_mirror,
    estimate_similarity,
    mirror_frames,
    preprocess_frames,
    sliding_windows,
)
from .splits import (
    DatasetSplit,
    SplitError,
    check_assignment,
    make_speaker_dependent_split,
    make_speaker_independent_split,
    speaker_of,
)
