"""
Management Command: compare
===========================
Compare two eval --details files on the same test set: means, relative
improvement of the candidate over the baseline and a paired t-test per
metric and cutoff.
"""
from core.commands import SessrecCommand
from evaluation.reports import compare_frame, read_details, write_table


class Command(SessrecCommand):
    help = "Relative improvement and paired t-test between two evaluated models."

    def add_arguments(self, parser):
        parser.add_argument('--candidate', required=True, help='Details file of the model under test.')
        parser.add_argument('--baseline', required=True, help='Details file of the reference model.')
        self.add_cutoff_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        cutoffs = self.cutoffs(options)
        candidate = read_details(options['candidate'])
        baseline = read_details(options['baseline'])
        frame = compare_frame(candidate, baseline, cutoffs)
        write_table(frame, options['out'])

        significant = frame[frame['significant'] == 'yes']
        self.stdout.write(self.style.SUCCESS(
            f"{len(significant)} of {len(frame)} metric/cutoff pairs differ significantly at 95%"
        ))
