"""
Management Command: cosine
==========================
Cosine similarity of the preference prediction to all item embeddings and
to the ground-truth next item, averaged over the test examples.
"""
from core.commands import SessrecCommand
from corpus.sessions import to_fixed
from evaluation.analysis import cosine_analysis
from evaluation.reports import cosine_frame, write_table


class Command(SessrecCommand):
    help = "Average cosine similarity between predictions and item embeddings."

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        self.add_corpus_argument(parser)
        self.add_checkpoint_argument(parser, required=True)
        self.add_threads_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        corpus = self.corpus(options)
        params, hp = self.model(options, corpus)
        fixed = [to_fixed(example, hp.n) for example in corpus.test]
        report = cosine_analysis(params, hp, fixed)
        write_table(cosine_frame(hp.variant, report), options['out'])
        if report.skipped_pairs:
            self.stdout.write(self.style.WARNING(f"skipped {report.skipped_pairs} zero-norm pairs"))
        self.stdout.write(self.style.SUCCESS(f"{hp.variant}: avg {report.avg:.4f}, next {report.next:.4f}"))
