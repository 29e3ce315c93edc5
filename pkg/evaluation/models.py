from django.db import models


class EvaluationRun(models.Model):
    """Metrics of one checkpoint (or stateless baseline) on a test set."""
    LABEL_CHOICES = (
        ('honest', 'Honest'),
        ('analysis', 'Analysis'),
    )

    variant = models.CharField(max_length=20)
    checkpoint_path = models.CharField(max_length=500, blank=True)
    corpus_path = models.CharField(max_length=500, blank=True)
    label = models.CharField(max_length=20, choices=LABEL_CHOICES, default='honest')
    examples = models.PositiveIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.variant} [{self.label}] on {self.examples} examples"


class MetricRow(models.Model):
    run = models.ForeignKey(EvaluationRun, on_delete=models.CASCADE, related_name='rows')
    k = models.PositiveIntegerField()
    recall = models.FloatField()
    mrr = models.FloatField()
    ndcg = models.FloatField()

    class Meta:
        ordering = ['run', 'k']
        unique_together = ('run', 'k')

    def __str__(self):
        return f"@{self.k}: recall {self.recall:.4f}, mrr {self.mrr:.4f}, ndcg {self.ndcg:.4f}"
