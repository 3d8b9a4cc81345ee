"""Random linear network coding toolkit.

Field arithmetic (:mod:`.galois`), the RLNC encoder/recoder/decoder
(:mod:`.codec`), the frame format (:mod:`.framing`), closed-form and
recursive latency models (:mod:`.analytic`), the multihop Monte-Carlo
simulator (:mod:`.simulator`) and UDP chain nodes (:mod:`.node`).
"""

from .analytic import ChannelModel, SchemeId
from .codec import CodedPacket, CodingParams, Decoder, Encoder, Generation, Recoder
from .galois import GF2, GF16, GF256, FieldSpec
from .simulator import Fidelity, ScenarioConfig, SimResult, run_many, simulate, sweep

__all__ = [
    "ChannelModel", "SchemeId", "CodedPacket", "CodingParams", "Decoder", "Encoder",
    "Generation", "Recoder", "GF2", "GF16", "GF256", "FieldSpec", "Fidelity",
    "ScenarioConfig", "SimResult", "run_many", "simulate", "sweep",
]

__version__ = "0.1.0"
