"""
Management Command: bench
=========================
Forward-only inference latency per test example. Timing always runs on a
single thread, numpy's BLAS pool included; --threads is ignored here.
"""
from core.commands import SessrecCommand, positive_int
from corpus.sessions import to_fixed
from evaluation.bench import bench_inference
from evaluation.reports import bench_frame, write_table


class Command(SessrecCommand):
    help = "Measure mean and p95 scoring latency; one row per checkpoint."

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--n', type=positive_int, help='Window length (POP only).')
        parser.add_argument('--checkpoint', action='append', default=[],
                            help='Checkpoint to time; repeat to compare variants side by side.')
        parser.add_argument('--repetitions', type=positive_int, default=1)
        parser.add_argument('--limit', type=positive_int, help='Time only the first N test examples.')
        self.add_corpus_argument(parser)
        self.add_threads_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        corpus = self.corpus({**options, 'threads': 1})
        examples = corpus.test[:options['limit']] if options.get('limit') else corpus.test

        rows = []
        for checkpoint in options['checkpoint'] or [None]:
            params, hp = self.model({**options, 'checkpoint': checkpoint}, corpus)
            fixed = [to_fixed(example, hp.n) for example in examples]
            report = bench_inference(params, hp, fixed, options['repetitions'], m=corpus.m)
            rows.append((hp.variant, report))
            self.stdout.write(
                f"{hp.variant}\tmean {report.mean_ms:.4f} ms\tp95 {report.p95_ms:.4f} ms\t{report.eps:.1f} examples/s"
            )

        write_table(bench_frame(rows), options['out'])
        self.stdout.write(self.style.SUCCESS(f"Benchmarked {len(rows)} model(s) on {len(examples)} examples"))
