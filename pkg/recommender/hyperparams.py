"""
Model hyperparameters and the variant catalogue.

    O        position-sensitive attention only
    P        prospective attention queried by the position-sensitive output
    OP       both preference predictions summed
    LAST_OP  as OP, but the prospective query is the last item (+ its position)
    ORACLE   attention queried by the true next item's embedding (analysis only)
    MEAN     mean pooling of the session's item embeddings
    POP      within-session popularity, no learned parameters
"""
from dataclasses import asdict, dataclass, replace

from core.exceptions import FlagError

VARIANTS = ('O', 'P', 'OP', 'LAST_OP', 'ORACLE', 'MEAN', 'POP')

# command-line spelling -> variant
VARIANT_NAMES = {
    'o': 'O',
    'p': 'P',
    'op': 'OP',
    'last': 'LAST_OP',
    'oracle': 'ORACLE',
    'mean': 'MEAN',
    'pop': 'POP',
}

SCALE_MODES = ('full_d', 'per_head')

PROSPECTIVE_VARIANTS = ('P', 'OP', 'LAST_OP')
ANALYSIS_VARIANTS = ('ORACLE',)


def parse_variant(name):
    key = str(name).strip().lower()
    if key in VARIANT_NAMES:
        return VARIANT_NAMES[key]
    if key.upper() in VARIANTS:
        return key.upper()
    raise FlagError(f"unknown variant '{name}' (choose from {', '.join(VARIANT_NAMES)})")


@dataclass(frozen=True)
class HyperParams:
    d: int = 64
    n: int = 10
    b: int = 1
    variant: str = 'OP'
    use_position_embeddings: bool = True
    use_pad_mask: bool = True
    attention_scale_mode: str = 'full_d'
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise FlagError(f"unknown variant '{self.variant}'")
        if self.attention_scale_mode not in SCALE_MODES:
            raise FlagError(f"unknown attention scale mode '{self.attention_scale_mode}'")
        for name in ('d', 'n', 'b', 'epochs', 'batch_size'):
            if getattr(self, name) < 1:
                raise FlagError(f"{name} must be at least 1")
        if self.d % self.b:
            raise FlagError(f"d={self.d} is not divisible by b={self.b}")
        if self.lr < 0:
            raise FlagError("lr must be non-negative")

    @property
    def head_width(self):
        return self.d // self.b

    @property
    def uses_prospective(self):
        return self.variant in PROSPECTIVE_VARIANTS

    @property
    def is_learned(self):
        return self.variant != 'POP'

    def with_changes(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return asdict(self)
