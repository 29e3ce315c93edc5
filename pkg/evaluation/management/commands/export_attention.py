"""
Management Command: export_attention
====================================
Average position-sensitive attention weights by session length and write
them as a CSV matrix (rows: length, columns: pos_1..pos_<max-len>).
"""
from core.commands import SessrecCommand, positive_int
from evaluation.analysis import EXPORT_MAX_LEN, attention_trace_export
from evaluation.reports import write_table


class Command(SessrecCommand):
    help = "Export mean attention weights per session length and position as CSV."

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--max-len', type=positive_int, default=EXPORT_MAX_LEN)
        self.add_corpus_argument(parser)
        self.add_checkpoint_argument(parser, required=True)
        self.add_threads_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        corpus = self.corpus(options)
        params, hp = self.model(options, corpus)
        frame = attention_trace_export(params, hp, corpus.test, options['max_len'])
        write_table(frame, options['out'], sep=',')
        if not hp.use_pad_mask:
            self.stdout.write(self.style.WARNING('pads were not masked: rows include weight spent on padding'))
        self.stdout.write(self.style.SUCCESS(f"Attention matrix written to {options['out']}"))
