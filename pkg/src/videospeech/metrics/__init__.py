from .cepstral import MCD_SCALE, mcd, mcd_from_cepstra, mel_cepstrum
from .report import (
    CommandPesq,
    CommandRecognizer,
    MetricReport,
    PluginError,
    clip_metrics,
    evaluate_corpus,
)
from .stoi import stoi
from .sync import audio_envelope, av_offset, correlation_curve, motion_energy
from .wer import align, edit_distance, wer
