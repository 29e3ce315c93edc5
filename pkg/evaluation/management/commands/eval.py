"""
Management Command: eval
========================
Score a checkpoint (or the stateless POP baseline) on the test examples of
a prepared corpus and write recall/MRR/NDCG per cutoff.
"""
from core.commands import SessrecCommand, positive_int
from core.exceptions import FlagError
from corpus.sessions import to_fixed
from evaluation.metrics import evaluate_model
from evaluation.models import EvaluationRun, MetricRow
from evaluation.reports import details_frame, metrics_frame, write_table
from recommender.hyperparams import ANALYSIS_VARIANTS, parse_variant

MODES = ('honest', 'analysis')


def report_label(variant, mode):
    return f"{variant} [analysis]" if mode == 'analysis' else variant


class Command(SessrecCommand):
    help = "Evaluate a model on the test split: recall, MRR and NDCG at each cutoff."

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--n', type=positive_int, help='Window length (POP only; checkpoints record their own).')
        parser.add_argument('--mode', choices=MODES, default='honest',
                            help='Analysis mode is required for variants that read the target.')
        parser.add_argument('--details', help='Also write per-example ranks here (input to compare).')
        self.add_corpus_argument(parser)
        self.add_checkpoint_argument(parser)
        self.add_cutoff_argument(parser)
        self.add_threads_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        cutoffs = self.cutoffs(options)
        if options.get('variant') and parse_variant(options['variant']) in ANALYSIS_VARIANTS \
                and options['mode'] != 'analysis':
            raise FlagError('the oracle variant reads the target and only runs with --mode analysis')

        corpus = self.corpus(options)
        params, hp = self.model(options, corpus)
        if hp.variant in ANALYSIS_VARIANTS and options['mode'] != 'analysis':
            raise FlagError(f'checkpoint holds the {hp.variant} variant; rerun with --mode analysis')

        fixed = [to_fixed(example, hp.n) for example in corpus.test]
        report = evaluate_model(params, hp, fixed, cutoffs, options['threads'], m=corpus.m)
        label = report_label(hp.variant, options['mode'])
        write_table(metrics_frame(label, report), options['out'])
        if options.get('details'):
            write_table(details_frame(report), options['details'])

        def save_run():
            run = EvaluationRun.objects.create(
                variant=hp.variant,
                checkpoint_path=options.get('checkpoint') or '',
                corpus_path=str(options['corpus']),
                label=options['mode'],
                examples=report.count,
            )
            MetricRow.objects.bulk_create([
                MetricRow(run=run, k=k, recall=recall, mrr=mrr, ndcg=ndcg)
                for k, recall, mrr, ndcg in report.rows()
            ])
            return run

        self.record('evaluation run', save_run)
        for k, recall, mrr, ndcg in report.rows():
            self.stdout.write(f"{label}\t@{k}\trecall {recall:.4f}\tmrr {mrr:.4f}\tndcg {ndcg:.4f}")
        self.stdout.write(self.style.SUCCESS(f"Evaluated {report.count} examples; metrics in {options['out']}"))
