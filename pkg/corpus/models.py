from django.db import models


class CorpusSnapshot(models.Model):
    """A prepared corpus directory and the statistics it was written with."""
    out_dir = models.CharField(max_length=500)
    source = models.CharField(max_length=500, blank=True)
    holdout_rule = models.CharField(max_length=100, blank=True)
    min_item_count = models.PositiveIntegerField(default=5)
    min_session_len = models.PositiveIntegerField(default=2)

    items = models.PositiveIntegerField(default=0)
    train_sessions = models.PositiveIntegerField(default=0)
    test_sessions = models.PositiveIntegerField(default=0)
    avg_length = models.FloatField(default=0.0)
    aug_train = models.PositiveIntegerField(default=0)
    aug_test = models.PositiveIntegerField(default=0)
    aug_avg_length = models.FloatField(default=0.0)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.out_dir} ({self.items} items, {self.aug_train}/{self.aug_test} examples)"
