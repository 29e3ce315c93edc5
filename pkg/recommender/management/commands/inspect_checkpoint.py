"""
Management Command: inspect_checkpoint
======================================
Print a checkpoint's header and tensor shapes without loading a corpus.
"""
import numpy as np

from core.commands import SessrecCommand
from recommender.checkpoint import load_checkpoint


class Command(SessrecCommand):
    help = "Show the variant, dimensions, training flags and tensors stored in a checkpoint."

    def add_arguments(self, parser):
        self.add_checkpoint_argument(parser, required=True)

    def run(self, **options):
        params, header = load_checkpoint(options['checkpoint'])
        self.stdout.write(f"variant\t{header.variant}")
        for field in ('m', 'd', 'n', 'b'):
            self.stdout.write(f"{field}\t{getattr(header, field)}")
        self.stdout.write(f"position_embeddings\t{'on' if header.use_position_embeddings else 'off'}")
        self.stdout.write(f"pad_mask\t{'on' if header.use_pad_mask else 'off'}")
        self.stdout.write(f"scale\t{header.attention_scale_mode}")

        total = 0
        for name, array in params.as_dict().items():
            total += array.size
            self.stdout.write(f"tensor\t{name}\t{array.shape[0]}x{array.shape[1]}\t|x|={np.linalg.norm(array):.6f}")
        self.stdout.write(self.style.SUCCESS(f"{total} parameters"))
