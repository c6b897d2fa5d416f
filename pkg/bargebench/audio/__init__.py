"""Audio core: waveforms, WAV I/O, log-mel features and the toy keyword corpus."""
from .features import FeatureMatrix, log_mel
from .phonemes import INVENTORY_SIZE, load_inventory, text_to_phonemes
from .synth import ToyKeyword, synth_babble, synth_keyword, synth_music
from .wav import SAMPLE_RATE, Waveform, read_wav, write_wav

__all__ = [
    "FeatureMatrix",
    "INVENTORY_SIZE",
    "SAMPLE_RATE",
    "ToyKeyword",
    "Waveform",
    "load_inventory",
    "log_mel",
    "read_wav",
    "synth_babble",
    "synth_keyword",
    "synth_music",
    "text_to_phonemes",
    "write_wav",
]
