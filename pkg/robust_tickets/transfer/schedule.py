from robust_tickets.config import TrainConfig
from robust_tickets.exceptions import ConfigError


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step schedule: ``base_lr * factor ** (#decay epochs <= epoch)``."""
    if not 0 <= epoch < cfg.epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {cfg.epochs})")
    drops = sum(1 for decay in cfg.decay_epochs if decay <= epoch)
    return cfg.base_lr * cfg.lr_decay_factor**drops
