from django.db import models


class TrainingRun(models.Model):
    """One invocation of the trainer, kept for later comparison of runs."""
    STATUS_CHOICES = (
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    )

    variant = models.CharField(max_length=20)
    hyperparams = models.JSONField(default=dict)
    seed = models.IntegerField(default=0)
    corpus_path = models.CharField(max_length=500, blank=True)
    checkpoint_path = models.CharField(max_length=500, blank=True)
    epoch_losses = models.JSONField(default=list)
    epoch_seconds = models.JSONField(default=list)
    best_validation_recall = models.FloatField(null=True, blank=True)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    error = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.variant} run #{self.pk} ({self.status})"

    def finish(self, report):
        self.epoch_losses = list(report.epoch_losses)
        self.epoch_seconds = list(report.epoch_seconds)
        self.best_validation_recall = report.best_validation_recall
        self.status = 'completed'
        self.save()

    def fail(self, error):
        self.status = 'failed'
        self.error = str(error)
        self.save()


class GridSearch(models.Model):
    corpus_path = models.CharField(max_length=500, blank=True)
    axes = models.JSONField(default=dict)
    best_hyperparams = models.JSONField(null=True, blank=True)
    best_recall = models.FloatField(null=True, blank=True)
    warnings = models.JSONField(default=list)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name_plural = 'Grid searches'

    def __str__(self):
        return f"Grid search #{self.pk} over {', '.join(self.axes)}"


class GridPoint(models.Model):
    search = models.ForeignKey(GridSearch, on_delete=models.CASCADE, related_name='points')
    position = models.PositiveIntegerField()
    values = models.JSONField(default=dict)
    validation_recall = models.FloatField(null=True, blank=True)
    status = models.CharField(max_length=20, default='completed')
    error = models.TextField(blank=True)

    class Meta:
        ordering = ['search', 'position']
        unique_together = ('search', 'position')

    def __str__(self):
        return f"{self.search} point {self.position}: {self.values}"
