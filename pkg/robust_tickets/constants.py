from typing import Literal

Granularity = Literal["element", "row", "kernel", "channel"]
PruningScheme = Literal["omp", "imp", "lmp"]
TicketScheme = Literal["OMP", "IMP-natural", "IMP-adversarial", "LMP"]
Locus = Literal["upstream", "downstream"]
PretrainSchemeName = Literal["natural", "adversarial", "random_smoothing"]
ImpObjective = Literal["natural", "adversarial"]
PruneScope = Literal["global", "per-layer"]
TransferMode = Literal["linear", "finetune"]
InitScheme = Literal["kaiming_uniform", "lecun_uniform"]
AdvInit = Literal["zero", "random"]
ScoreInit = Literal["magnitude", "uniform"]

PRETRAIN_SCHEMES: tuple[PretrainSchemeName, ...] = (
    "natural",
    "adversarial",
    "random_smoothing",
)
WINNER_LABELS: dict[PretrainSchemeName, str] = {
    "adversarial": "Robust",
    "natural": "Natural",
    "random_smoothing": "Smoothing",
}
MATCH_LABEL = "Match"

INPUT_RANGE = (0.0, 1.0)
ECE_BINS = 15
PROB_FLOOR = 1e-12
PSD_TOLERANCE = 1e-8
PROB_ROW_TOLERANCE = 1e-6

FORMAT_VERSION = 1
CHECKPOINT_MAGIC = b"RTCKPT\x00\x01"
MASK_MAGIC = b"RTMASK\x00\x01"
